"""Homogeneous/affine pencil utilities: rectangular evaluation, probabilistic
fullness testing, and the rank conditions used by the extension theorems."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .numkernel import (
    MatrixTuple,
    kron,
    matrix_from_json,
    matrix_to_json,
    random_tuple,
    sigma_extremes,
    svd_rank,
)
from .realization import AffinePencil

__all__ = [
    "HomogeneousPencil",
    "FullnessReport",
    "rect_eval",
    "is_full",
    "rank_conditions",
]

FULL_TOL = 1e-9


@dataclass(frozen=True)
class HomogeneousPencil:
    """L1 x1 + ... + Ld xd with e x e coefficients (no constant term)."""

    coeffs: tuple[np.ndarray, ...]

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
        return len(self.coeffs)

    def transpose(self) -> "HomogeneousPencil":
        return HomogeneousPencil(tuple(c.T for c in self.coeffs))

    def to_json(self) -> dict:
        return {"e": self.size, "coeffs": [matrix_to_json(c) for c in self.coeffs]}

    @staticmethod
    def from_json(obj: dict) -> "HomogeneousPencil":
        return HomogeneousPencil(tuple(matrix_from_json(c) for c in obj["coeffs"]))


def rect_eval(L: HomogeneousPencil, X: MatrixTuple) -> np.ndarray:
    """sum_j Lj o Xj for a possibly rectangular tuple X."""
    if X.d != L.nvars:
        raise ValueError(f"pencil has {L.nvars} variables, tuple has {X.d}")
    out = np.zeros((L.size * X.rows, L.size * X.cols), dtype=complex)
    for j in range(X.d):
        out += kron(L.coeffs[j], X[j])
    return out


def _square_eval(pencil, X: MatrixTuple) -> np.ndarray:
    """Evaluate an affine or homogeneous pencil at a square tuple."""
    if isinstance(pencil, AffinePencil):
        from .realization import pencil_eval

        return pencil_eval(pencil, X)
    return rect_eval(pencil, X)


@dataclass(frozen=True)
class FullnessReport:
    verdict: str  # "full" | "not-full-probabilistic" | "degenerate"
    witness: MatrixTuple | None
    witness_sigma_min: float
    trials_used: int
    size_probed: int

    def to_json(self) -> dict:
        return {
            "verdict": self.verdict,
            "witness": self.witness.to_json() if self.witness is not None else None,
            "witness_sigma_min": self.witness_sigma_min,
            "trials_used": self.trials_used,
            "size_probed": self.size_probed,
        }


def is_full(pencil, trials: int = 20, seed=0, tol: float = FULL_TOL) -> FullnessReport:
    """Probabilistic fullness test at the guaranteed witness size max(1, e-1).

    A single generic invertible evaluation certifies fullness; if every trial
    is singular, det vanishes identically at that size with probability 1 and
    the pencil is not full.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    e = pencil.size
    d = pencil.nvars
    if all(np.all(c == 0) for c in pencil.coeffs):
        return FullnessReport("degenerate", None, 0.0, 0, 0)
    n = max(1, e - 1)
    rng = np.random.default_rng(seed)
    last_smin = 0.0
    for t in range(trials):
        X = random_tuple(d, n, n, mode="generic", rng=rng)
        MX = _square_eval(pencil, X)
        smin, smax = sigma_extremes(MX)
        last_smin = smin
        if smax > 0 and smin > tol * smax:
            return FullnessReport("full", X, smin, t + 1, n)
    return FullnessReport("not-full-probabilistic", None, last_smin, trials, n)


def rank_conditions(L: HomogeneousPencil, Y: MatrixTuple, Yp: MatrixTuple,
                    Ypp: MatrixTuple, tol: float = FULL_TOL):
    """Full column rank of L([Y; Y']) and full row rank of L([Y  Y'']).

    Y is l x l, Y' is m x l, Y'' is l x m.  Returns (col_ok, row_ok, sigmas).
    """
    ell = Y.rows
    if Y.cols != ell:
        raise ValueError("Y must be square")
    if Yp.d and Yp.cols != ell:
        raise ValueError("Y' must have l columns")
    if Ypp.d and Ypp.rows != ell:
        raise ValueError("Y'' must have l rows")
    stacked = MatrixTuple(tuple(np.vstack([Y[j], Yp[j]]) for j in range(Y.d)))
    concat = MatrixTuple(tuple(np.hstack([Y[j], Ypp[j]]) for j in range(Y.d)))
    col_rank, col_smin = svd_rank(rect_eval(L, stacked), tol)
    row_rank, row_smin = svd_rank(rect_eval(L, concat), tol)
    want = L.size * ell
    return col_rank == want, row_rank == want, (col_smin, row_smin)
