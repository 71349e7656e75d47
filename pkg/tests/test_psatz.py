"""Quadratic-module certificates, eigenvalue optimization, identity checking."""

import numpy as np
import pytest

from ncrat import expr as ex
from ncrat.psatz import (
    MonicHermitianPencil,
    build_sdp,
    certify_qm,
    check_identity,
    find_violation,
    optimize_eig,
)

# L(x1) = 1 - x1^2 as a monic pencil: eigenvalues of x1 in [-1, 1]
INTERVAL = MonicHermitianPencil((np.array([[1.0, 0.0], [0.0, -1.0]]),))


class TestMonicHermitianPencil:
    def test_trivial(self):
        L = MonicHermitianPencil.trivial()
        assert L.is_trivial() and L.size == 1

    def test_eval(self, rng):
        from ncrat.numkernel import random_tuple

        X = random_tuple(1, 2, 2, mode="hermitian", rng=rng)
        val = INTERVAL.eval(X)
        assert val.shape == (4, 4)
        assert np.allclose(val[:2, :2], np.eye(2) + X[0])

    def test_nonhermitian_rejected(self):
        with pytest.raises(ValueError):
            MonicHermitianPencil((np.array([[0.0, 1.0], [0.0, 0.0]]),))

    def test_json_round_trip(self):
        L = MonicHermitianPencil.from_json(INTERVAL.to_json())
        assert np.array_equal(L.coeffs[0], INTERVAL.coeffs[0])


class TestCertify:
    def test_square_certifies(self):
        r = ex.parse("x1*x1", d=1)
        cert = certify_qm(r, level=1, seed=0)
        assert cert is not None
        assert cert.residual <= 1e-6
        assert 1 <= len(cert.squares) <= cert.carath_bound

    def test_indefinite_not_certified(self):
        r = ex.parse("x1", d=1)
        assert certify_qm(r, level=1, seed=0) is None
        X = find_violation(r, seed=0)
        assert X is not None
        assert np.linalg.eigvalsh(X[0])[0] < 0

    def test_localized_certificate(self):
        # 2 - x1^2 is psd on the interval spectrahedron but not globally
        r = ex.parse("2 - x1*x1", d=1)
        cert = certify_qm(r, INTERVAL, level=1, seed=0)
        assert cert is not None and cert.residual <= 1e-6
        assert cert.G is not None and len(cert.vectors) >= 1
        assert find_violation(r, seed=0) is not None
        assert find_violation(r, INTERVAL, seed=0) is None

    def test_nonhermitian_rejected(self):
        with pytest.raises(ValueError):
            certify_qm(ex.parse("x1*x2", d=2), level=1)


class TestOptimize:
    def test_sup_on_interval(self):
        out = optimize_eig(ex.var(1), INTERVAL, direction="sup", level=1, seed=0)
        assert out.status == "optimal"
        assert out.mu == pytest.approx(1.0, abs=1e-5)
        assert out.certificate is not None
        assert out.certificate.residual <= 1e-6

    def test_inf_of_square(self):
        out = optimize_eig(ex.parse("x1*x1", d=1), direction="inf", level=1, seed=0)
        assert out.status == "optimal"
        assert out.mu == pytest.approx(0.0, abs=1e-6)

    def test_sup_of_resolvent(self):
        # sup of inv(2 - x1) on the interval is 1, attained at x1 = 1
        r = ex.parse("inv(2-x1)", d=1)
        for level in (1, 2):
            out = optimize_eig(r, INTERVAL, direction="sup", level=level, seed=0)
            assert out.status == "optimal"
            assert out.mu == pytest.approx(1.0, abs=1e-4)

    def test_sup_unbounded_without_pencil(self):
        out = optimize_eig(ex.var(1), direction="sup", level=1, seed=0)
        assert out.status in ("unbounded-at-level", "solver-failure", "infeasible-at-level")
        assert out.certificate is None

    def test_bad_direction(self):
        with pytest.raises(ValueError):
            optimize_eig(ex.var(1), INTERVAL, direction="max")


class TestBuildSdp:
    def test_shapes(self):
        prob = build_sdp(ex.parse("x1*x1", d=1), level=1, seed=0)
        assert prob.nfree == 0
        assert prob.m > 0

    def test_directions_add_free_scalar(self):
        prob = build_sdp(ex.var(1), INTERVAL, level=1, direction="sup", seed=0)
        assert prob.nfree == 1

    def test_bad_direction(self):
        with pytest.raises(ValueError):
            build_sdp(ex.var(1), direction="both")


class TestCheckIdentity:
    def test_equal(self):
        lhs = ex.parse("x1*x2 + x2*x1", d=2)
        rhs = ex.parse("x2*x1 + x1*x2", d=2)
        passed, worst, compared = check_identity(lhs, rhs)
        assert passed and worst <= 1e-8 and compared == 50

    def test_noncommutative_difference_detected(self):
        passed, worst, _ = check_identity(ex.parse("x1*x2", d=2),
                                          ex.parse("x2*x1", d=2))
        assert not passed and worst > 1e-3

    def test_inverse_identity(self):
        # inv(1 - x1) - 1 = inv(1 - x1) x1
        lhs = ex.parse("inv(1-x1) - 1", d=1)
        rhs = ex.parse("inv(1-x1)*x1", d=1)
        passed, worst, _ = check_identity(lhs, rhs)
        assert passed, worst

    def test_bad_mode(self):
        with pytest.raises(ValueError):
            check_identity(ex.var(1), ex.var(1), mode="weird")
