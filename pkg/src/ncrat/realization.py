"""Linear representations (u, M, v) of formal rational expressions.

The recursive construction yields an affine pencil M with
r(X) = (u* o I) M(X)^{-1} (v o I) wherever r is defined, and M(X) invertible
exactly on the domain of r for square matrix tuples.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import expr as ex
from .expr import Expr
from .numkernel import (
    MatrixTuple,
    SingularMatrixError,
    kron,
    lu_solve,
    matrix_from_json,
    matrix_to_json,
    sigma_extremes,
)

__all__ = [
    "AffinePencil",
    "Realization",
    "DomainError",
    "build_realization",
    "pencil_eval",
    "eval_expr",
    "realization_eval",
    "in_domain",
    "likely_degenerate",
]

SINGULAR_TOL = 1e-9


class DomainError(ArithmeticError):
    """An inverse node is singular at the evaluated tuple."""

    def __init__(self, subexpr: Expr, sigma_min: float):
        super().__init__(
            f"singular inverse at subexpression {ex.to_str(subexpr)} (sigma_min {sigma_min:.3e})"
        )
        self.subexpr = subexpr
        self.sigma_min = sigma_min


@dataclass(frozen=True)
class AffinePencil:
    """M0 + M1 x1 + ... + Md xd with e x e coefficients."""

    coeffs: tuple[np.ndarray, ...]  # length d+1, M0 first

    def __post_init__(self):
        mats = tuple(np.asarray(c, dtype=complex) for c in self.coeffs)
        sizes = {c.shape for c in mats}
        if len(sizes) != 1 or any(c.shape[0] != c.shape[1] for c in mats):
            raise ValueError("pencil coefficients must be square and share a size")
        object.__setattr__(self, "coeffs", mats)

    @property
    def size(self) -> int:
        return self.coeffs[0].shape[0]

    @property
    def nvars(self) -> int:
        return len(self.coeffs) - 1

    def to_json(self) -> dict:
        return {"e": self.size, "M": [matrix_to_json(c) for c in self.coeffs]}

    @staticmethod
    def from_json(obj: dict) -> "AffinePencil":
        return AffinePencil(tuple(matrix_from_json(c) for c in obj["M"]))


def pencil_eval(M: AffinePencil, X: MatrixTuple) -> np.ndarray:
    """M0 o I_n + sum_j Mj o Xj for a square tuple X."""
    if X.rows != X.cols:
        raise ValueError("affine pencil evaluation needs a square tuple")
    if X.d != M.nvars:
        raise ValueError(f"pencil has {M.nvars} variables, tuple has {X.d}")
    n = X.rows
    out = kron(M.coeffs[0], np.eye(n))
    for j in range(X.d):
        out += kron(M.coeffs[j + 1], X[j])
    return out


@dataclass(frozen=True)
class Realization:
    u: np.ndarray
    pencil: AffinePencil
    v: np.ndarray
    source: Expr

    @property
    def size(self) -> int:
        return self.pencil.size

    def to_json(self) -> dict:
        return {
            "e": self.size,
            "u": [[float(z.real), float(z.imag)] for z in self.u],
            "v": [[float(z.real), float(z.imag)] for z in self.v],
            "M": [matrix_to_json(c) for c in self.pencil.coeffs],
        }


def build_realization(r: Expr, d: int | None = None) -> Realization:
    """Recursive construction of a linear representation of r.

    Sizes are exact: 1 for scalars, 2 for variables, e1+e2 for sums and
    products, e+1 for inverses.  No minimization is attempted.
    """
    if d is None:
        d = max(ex.variables_used(r), default=0)
    u, coeffs, v = _build(r, d)
    return Realization(u, AffinePencil(tuple(coeffs)), v, r)


def _zeros(e: int, d: int) -> list[np.ndarray]:
    return [np.zeros((e, e), dtype=complex) for _ in range(d + 1)]


def _build(r: Expr, d: int):
    if r.kind == ex.SCALAR:
        coeffs = _zeros(1, d)
        coeffs[0][0, 0] = 1
        return np.array([1.0 + 0j]), coeffs, np.array([r.value])
    if r.kind == ex.VAR:
        coeffs = _zeros(2, d)
        coeffs[0][:] = np.eye(2)
        coeffs[r.index][0, 1] = -1
        u = np.array([1, 0], dtype=complex)
        v = np.array([0, 1], dtype=complex)
        return u, coeffs, v
    if r.kind == ex.ADD:
        u1, c1, v1 = _build(r.children[0], d)
        u2, c2, v2 = _build(r.children[1], d)
        e1, e2 = len(u1), len(u2)
        coeffs = _zeros(e1 + e2, d)
        for k in range(d + 1):
            coeffs[k][:e1, :e1] = c1[k]
            coeffs[k][e1:, e1:] = c2[k]
        return np.concatenate([u1, u2]), coeffs, np.concatenate([v1, v2])
    if r.kind == ex.MUL:
        u1, c1, v1 = _build(r.children[0], d)
        u2, c2, v2 = _build(r.children[1], d)
        e1, e2 = len(u1), len(u2)
        coeffs = _zeros(e1 + e2, d)
        for k in range(d + 1):
            coeffs[k][:e1, :e1] = c1[k]
            coeffs[k][e1:, e1:] = c2[k]
        coeffs[0][:e1, e1:] -= np.outer(v1, u2.conj())
        u = np.concatenate([u1, np.zeros(e2, dtype=complex)])
        v = np.concatenate([np.zeros(e1, dtype=complex), v2])
        return u, coeffs, v
    # inverse
    u1, c1, v1 = _build(r.children[0], d)
    e1 = len(u1)
    coeffs = _zeros(e1 + 1, d)
    for k in range(d + 1):
        coeffs[k][:e1, :e1] = c1[k]
    coeffs[0][:e1, e1] = v1
    coeffs[0][e1, :e1] = u1.conj()
    u = np.zeros(e1 + 1, dtype=complex)
    u[e1] = -1
    v = np.zeros(e1 + 1, dtype=complex)
    v[e1] = 1
    return u, coeffs, v


def realization_eval(rep: Realization, X: MatrixTuple,
                     tol: float = SINGULAR_TOL) -> np.ndarray:
    """(u* o I) M(X)^{-1} (v o I); raises on a singular pencil evaluation."""
    n = X.rows
    MX = pencil_eval(rep.pencil, X)
    smin, smax = sigma_extremes(MX)
    if smin <= tol * max(smax, 1e-300):
        raise DomainError(rep.source, smin)
    rhs = kron(rep.v.reshape(-1, 1), np.eye(n))
    sol = lu_solve(MX, rhs)
    lhs = kron(rep.u.conj().reshape(1, -1), np.eye(n))
    return lhs @ sol


def _safe_inverse(value: np.ndarray, node: Expr, tol: float) -> np.ndarray:
    smin, smax = sigma_extremes(value)
    if smin <= tol * max(smax, 1e-300):
        raise DomainError(node, smin)
    return lu_solve(value, np.eye(value.shape[0]))


def eval_expr(r: Expr, X: MatrixTuple, tol: float = SINGULAR_TOL) -> np.ndarray:
    """Recursive tree evaluation at a square tuple.

    Raises DomainError naming the innermost singular inverse node.
    """
    if X.rows != X.cols:
        raise ValueError("evaluation needs a square tuple")
    n = X.rows

    def rec(e: Expr) -> np.ndarray:
        if e.kind == ex.SCALAR:
            return e.value * np.eye(n)
        if e.kind == ex.VAR:
            if e.index > X.d:
                raise ValueError(f"expression uses x{e.index} but tuple has d={X.d}")
            return np.array(X[e.index - 1])
        if e.kind == ex.ADD:
            return rec(e.children[0]) + rec(e.children[1])
        if e.kind == ex.MUL:
            return rec(e.children[0]) @ rec(e.children[1])
        return _safe_inverse(rec(e.children[0]), e, tol)

    return rec(r)


def in_domain(r: Expr, X: MatrixTuple, d: int | None = None,
              tol: float = SINGULAR_TOL,
              rep: Realization | None = None) -> tuple[bool, float]:
    """Whether the realization pencil of r is invertible at X.

    Returns (verdict, sigma_min of M(X)).
    """
    if rep is None:
        if d is None:
            d = max(max(ex.variables_used(r), default=0), X.d)
        rep = build_realization(r, d)
    MX = pencil_eval(rep.pencil, X)
    smin, smax = sigma_extremes(MX)
    return smin > tol * max(smax, 1e-300), smin


def likely_degenerate(r: Expr, d: int | None = None, trials: int = 32,
                      seed=0) -> bool:
    """Probabilistic emptiness check of the domain via hermitian sampling.

    Samples hermitian tuples at sizes 1..e-1; if the realization pencil is
    singular at all of them, the expression is likely degenerate.
    """
    if d is None:
        d = max(ex.variables_used(r), default=1)
    rep = build_realization(r, d)
    rng = np.random.default_rng(seed)
    from .numkernel import random_tuple

    sizes = list(range(1, max(rep.size, 2)))
    for t in range(trials):
        n = sizes[t % len(sizes)]
        X = random_tuple(d, n, n, mode="hermitian", rng=rng)
        ok, _ = in_domain(r, X, d=d, rep=rep)
        if ok:
            return False
    return True
