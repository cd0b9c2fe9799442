import json

import numpy as np
import pytest

from momentsos.certify import (
    CertifySettings,
    certificate_value_gap,
    certify,
    check_unconstrained_rank,
    check_flatness,
    check_rank_bound,
    numerical_rank,
    rank_report,
)
from momentsos.moments import MomentSequence, moment_matrix, moments_of_atoms
from momentsos.poly import Polynomial, Pop, evaluate
from momentsos.relaxation import build_Qn, build_unconstrained
from momentsos.sdp import SolveResult, solve
from conftest import four_minimizers, halfplane_qcqp, interval_qcqp, motzkin


def test_numerical_rank_examples():
    r, sv = numerical_rank(np.diag([1.0, 1e-12]), 1e-8)
    assert r == 1 and len(sv) == 2
    M = moment_matrix(moments_of_atoms([[1.0, 2.0]], [1.0], 1))
    assert numerical_rank(M, 1e-8)[0] == 1
    assert numerical_rank(np.array([[1, 0, 1], [0, 1, 0], [1, 0, 1.0]]))[0] == 2
    assert numerical_rank(np.zeros((3, 3)))[0] == 0


def test_rank_report_monotone():
    phi = moments_of_atoms(np.random.default_rng(0).normal(size=(5, 2)), np.full(5, 0.2), 3)
    rep = rank_report(phi)
    assert list(rep.ranks) == sorted(rep.ranks) and rep.rank() == 5
    assert json.loads(json.dumps(rep.to_dict()))["ranks"] == list(rep.ranks)


def test_rank_bound_check():
    three = moments_of_atoms([[-1.0], [0.0], [1.0]], [0.3, 0.4, 0.3], 3)
    assert check_rank_bound(three, 3, 1)[0]  # 3 <= 3
    two = moments_of_atoms([[-1.0], [1.0]], [0.5, 0.5], 2)
    assert not check_rank_bound(two, 2, 2)[0]  # 2 > 1
    with pytest.raises(ValueError):
        check_rank_bound(two, 1, 2)
    res = solve(build_Qn(halfplane_qcqp(), 1))
    ok, rep = check_rank_bound(res.moments, 1, 1)
    assert ok and rep.rank(1) == 1


def test_flatness_check():
    pair = moments_of_atoms([[0.0], [1.0]], [0.5, 0.5], 2)
    ok, rep = check_flatness(pair, 2, 1)
    assert ok and rep.ranks == (1, 2, 2)
    pts = np.random.default_rng(7).normal(size=(6, 2))
    six = moments_of_atoms(pts, np.full(6, 1 / 6), 2)
    ok, rep = check_flatness(six, 2, 1)
    assert not ok and rep.rank(2) == 6 and rep.rank(1) == 3
    # n == gap compares with the 1x1 matrix [phi_0]
    assert check_flatness(moments_of_atoms([[0.3]], [1.0], 1), 1, 1)[0]
    assert not check_flatness(pair, 1, 1)[0]
    with pytest.raises(ValueError):
        check_flatness(pair, 1, 2)


def _diag_sequence(n, rank):
    """One-variable sequence whose M_n has a prescribed rank (Hankel of ``rank`` atoms)."""
    pts = np.linspace(-1, 1, rank)[:, None]
    return moments_of_atoms(pts, np.full(rank, 1 / rank), n)


def test_unconstrained_rank_check():
    x = np.random.default_rng(1).normal(size=(6, 2))
    assert check_unconstrained_rank(moments_of_atoms(x, np.full(6, 1 / 6), 2), 2)[0]  # 6 <= 6
    x7 = np.random.default_rng(1).normal(size=(7, 2))
    assert not check_unconstrained_rank(moments_of_atoms(x7, np.full(7, 1 / 7), 3), 3)[0]  # 7 > 6
    x9 = np.random.default_rng(1).normal(size=(9, 2))
    assert check_unconstrained_rank(moments_of_atoms(x9, np.full(9, 1 / 9), 4), 4)[0]  # 9 <= 9
    with pytest.raises(ValueError):
        check_unconstrained_rank(_diag_sequence(1, 1), 1)


def test_certify_halfplane():
    P = halfplane_qcqp()
    res = solve(build_Qn(P, 1))
    cert = certify(P, 1, res)
    assert cert.kind == "ExactByRank" and cert.exact and cert.minimizers_verified
    assert cert.value == pytest.approx(0.5, abs=1e-6)
    assert np.allclose(cert.measure.points, [[0.5, 0.5]], atol=1e-5)
    assert cert.details["rank"] == 1 <= cert.details["rank_threshold"]
    assert certificate_value_gap(cert, res.moments, P.objective) <= 1e-5
    data = json.loads(cert.to_json())
    assert data["kind"] == "ExactByRank" and data["ranks"]["ranks"] == [1, 1]


def test_certify_interval():
    P = interval_qcqp()
    res = solve(build_Qn(P, 2))
    cert = certify(P, 2, res)
    assert cert.kind == "ExactByRank" and cert.value == pytest.approx(-1, abs=1e-6)
    assert sorted(cert.measure.points.ravel().round(5)) == [-1.0, 1.0]
    low = certify(P, 1, solve(build_Qn(P, 1)))
    assert low.kind == "Inconclusive" and low.value_claim == "lower bound only"


def test_certify_flatness_branch():
    # v = 2 constraint: rank 3 > n - v + 1 = 2 but rank M_3 == rank M_1
    x, y = Polynomial.variables(2)
    P = Pop(x**2 + y**2, [4 - x**4 - y**4])
    pts = [[0.0, 0.0], [0.5, 0.0], [0.0, 0.5]]
    phi = moments_of_atoms(pts, [0.2, 0.3, 0.5], 3)
    value = sum(w * evaluate(P.objective, p) for w, p in zip([0.2, 0.3, 0.5], pts))
    fake = SolveResult("optimal", "moment", value, value, value, phi)
    # the atoms are not minimizers of P, so only the rank logic is checked here
    cert = certify(P, 3, fake, CertifySettings(tol_value=1.0))
    assert cert.kind == "ExactByFlatness"
    assert cert.details["rank"] == 3 and cert.details["rank_low"] == 3


def test_certify_never_overclaims_rank():
    P = interval_qcqp()
    phi = moments_of_atoms([[-1.0], [0.0], [1.0]], [0.3, 0.4, 0.3], 2)
    fake = SolveResult("optimal", "moment", -0.6, -0.6, -0.6, phi)
    cert = certify(P, 2, fake)
    assert cert.kind == "Inconclusive"


def test_certify_unconstrained():
    f = four_minimizers()
    res = solve(build_unconstrained(f))
    cert = certify(Pop(f), 2, res)
    assert cert.kind == "UnconstrainedExact" and cert.details["rank"] <= 6
    assert all(f(p) <= 1e-5 for p in cert.measure.points)


def test_certify_motzkin_inconclusive():
    f = motzkin()
    res = solve(build_unconstrained(f))
    cert = certify(Pop(f), 3, res)
    assert not cert.exact and cert.kind == "Inconclusive"


def test_certify_quadratic_analytic():
    (x,) = Polynomial.variables(1)
    f = (x - 1) ** 2
    cert = certify(Pop(f), 1, solve(build_unconstrained(f)))
    assert cert.kind == "UnconstrainedExact" and np.allclose(cert.measure.points, [[1.0]])
    g = -(x**2) + 1
    cert = certify(Pop(g), 1, solve(build_unconstrained(g)))
    assert cert.kind == "Inconclusive"


def test_certify_preconditions():
    P = halfplane_qcqp()
    res = solve(build_Qn(P, 1))
    (x,) = Polynomial.variables(1)
    with pytest.raises(ValueError, match="n >= v"):
        certify(Pop(x**2, [1 - x**4]), 1, res)
    with pytest.raises(ValueError, match="deg"):
        certify(Pop(x**6, [1 - x**2]), 2, res)
    with pytest.raises(ValueError, match="2n"):
        certify(Pop(x**4), 1, res)
