"""Shared helpers: random expression generation and domain-aware sampling."""

import numpy as np
import pytest

from ncrat import expr as ex
from ncrat.numkernel import MatrixTuple, random_tuple
from ncrat.realization import DomainError, eval_expr


def random_expr(rng: np.random.Generator, depth: int, d: int) -> ex.Expr:
    """Random expression tree of the given depth over x1..xd.

    Inverses are shifted by a random scalar so the result is rarely
    degenerate; leaves mix variables and scalars.
    """
    if depth == 0:
        if rng.random() < 0.25:
            return ex.scalar(complex(rng.standard_normal(), 0))
        return ex.var(int(rng.integers(1, d + 1)))
    kind = rng.choice(["add", "mul", "inv", "sub"])
    if kind == "inv":
        inner = random_expr(rng, depth - 1, d)
        shift = ex.scalar(complex(2 + rng.random(), 0))
        return ex.inv(ex.add(inner, shift))
    a = random_expr(rng, depth - 1, d)
    b = random_expr(rng, int(rng.integers(0, depth)), d)
    if kind == "add":
        return ex.add(a, b)
    if kind == "sub":
        return ex.sub(a, b)
    return ex.mul(a, b)


def in_domain_tuple(r, d, rng, n, budget=50):
    """A hermitian tuple of size n in the domain of r, or None."""
    for _ in range(budget):
        X = random_tuple(d, n, n, mode="hermitian", rng=rng)
        try:
            eval_expr(r, X)
            return X
        except DomainError:
            continue
    return None


@pytest.fixture
def rng():
    return np.random.default_rng(0)
