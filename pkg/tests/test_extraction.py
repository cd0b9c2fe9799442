import json

import numpy as np
import pytest

from momentsos.extraction import (
    AtomicMeasure,
    ExtractionFailed,
    RecoveryFailed,
    dehomogenize,
    extract_atoms,
    extract_homogeneous_atoms,
    fit_weights,
    qcqp_recover,
    transform_hom_moments,
    unconstrained_minimizers,
    verify_moments,
    verify_support,
    witness_polynomial,
)
from momentsos.moments import MomentSequence, moments_of_atoms
from momentsos.poly import Polynomial, Pop, monomial_basis
from momentsos.relaxation import build_Qn, build_unconstrained
from momentsos.sdp import solve
from conftest import four_minimizers, halfplane_qcqp, interval_qcqp, match_points


def test_atomic_measure_invariants():
    mu = AtomicMeasure([[0.0], [1.0]], [0.25, 0.5])
    assert mu.mass == 0.75 and len(mu) == 2 and mu.nvars == 1
    with pytest.raises(ValueError):
        AtomicMeasure([[0.0]], [0.0])
    with pytest.raises(ValueError):
        AtomicMeasure([[0.0], [1.0]], [1.0])
    data = json.loads(json.dumps(mu.to_dict()))
    assert data["mass"] == 0.75 and data["points"] == [[0.0], [1.0]]


def test_extract_dirac():
    mu = extract_atoms(moments_of_atoms([[0.5, 0.5]], [1.0], 1))
    assert np.allclose(mu.points, [[0.5, 0.5]]) and np.allclose(mu.weights, [1.0])


def test_extract_symmetric_pair():
    mu = extract_atoms(moments_of_atoms([[-1.0], [1.0]], [0.5, 0.5], 2))
    assert match_points(mu.points, [[-1.0], [1.0]]) <= 1e-8
    assert np.allclose(mu.weights, [0.5, 0.5], atol=1e-8)


def test_extract_three_atoms():
    pts = [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]
    mu = extract_atoms(moments_of_atoms(pts, [1 / 3] * 3, 2))
    assert match_points(mu.points, pts) <= 1e-6
    assert np.allclose(mu.weights, 1 / 3, atol=1e-6)
    assert mu.provenance == "flat"


def test_extract_needs_kernel_expansion():
    # four atoms with rank M_1 = 3 < rank M_2 = 4: the echelon basis has a top-degree monomial
    pts = [[1.0, 1.0], [1.0, -1.0], [-1.0, 1.0], [-1.0, -1.0]]
    phi = moments_of_atoms(pts, [0.25] * 4, 2)
    mu = extract_atoms(phi)
    assert mu.provenance.startswith("kernel-expanded")
    assert match_points(mu.points, pts) <= 1e-8
    assert verify_moments(mu, phi).residual <= 1e-10


def test_extract_full_rank_fails():
    # M_2 of full rank in one variable: no multiplication structure closes
    phi = MomentSequence(1, 4, [1.0, 0.0, 1.0, 0.0, 3.0])
    with pytest.raises(ExtractionFailed):
        extract_atoms(phi)


def test_extract_rejects_zero_matrix():
    with pytest.raises(ExtractionFailed):
        extract_atoms(MomentSequence(1, 2, np.zeros(3)))


def test_fit_weights_prunes_spurious_points():
    phi = moments_of_atoms([[0.0], [1.0]], [0.5, 0.5], 2)
    pts, w = fit_weights(np.array([[0.0], [1.0], [7.0]]), phi)
    assert len(pts) == 2 and np.allclose(w, [0.5, 0.5])


def test_dehomogenize_examples():
    out = dehomogenize(AtomicMeasure([[1.0, 0.5, 0.5]], [1.0]), 1)
    assert np.allclose(out.measure.points, [[0.5, 0.5]]) and np.allclose(out.measure.weights, [1.0])
    assert out.discarded_mass == 0.0
    out = dehomogenize(AtomicMeasure([[2.0, 2.0, 4.0]], [1.0]), 1)
    assert np.allclose(out.measure.points, [[1.0, 2.0]]) and np.allclose(out.measure.weights, [4.0])
    with pytest.raises(ValueError):
        dehomogenize(AtomicMeasure([[0.0, 1.0, 0.0]], [1.0]), 1)
    out = dehomogenize(AtomicMeasure([[1.0, 3.0], [0.0, 1.0]], [0.5, 0.25]), 2)
    assert out.discarded == 1 and out.discarded_mass == 0.25


def test_verify_support_examples():
    x, y = Polynomial.variables(2)
    rep = verify_support(AtomicMeasure([[0.5, 0.5]], [1.0]), Pop(x * x, [x + y - 1]))
    assert rep.margins[0, 0] == pytest.approx(0.0) and rep.passed
    (z,) = Polynomial.variables(1)
    P = Pop(-(z**2), [1 - z**2])
    rep = verify_support(AtomicMeasure([[2.0]], [1.0]), P)
    assert rep.margins[0, 0] == -3.0 and not rep.passed
    rep = verify_support(AtomicMeasure([[-1.0], [1.0]], [0.5, 0.5]), P)
    assert np.allclose(rep.margins, 0.0) and rep.passed
    with pytest.raises(ValueError):
        verify_support(AtomicMeasure([[1.0, 2.0]], [1.0]), P)


def test_verify_moments_examples():
    pts, w = [[0.3, -0.1], [1.2, 0.4]], [0.6, 0.4]
    phi = moments_of_atoms(pts, w, 2)
    mu = AtomicMeasure(pts, w)
    assert verify_moments(mu, phi).residual <= 1e-10
    vals = phi.values.copy()
    vals[4] += 1e-3
    bad = verify_moments(mu, MomentSequence(2, 4, vals), tol=1e-6)
    assert bad.residual >= 1e-4 and not bad.passed
    with pytest.raises(ValueError):
        verify_moments(mu, phi, 5)


def test_witness_polynomial_examples():
    (x,) = Polynomial.variables(1)
    assert witness_polynomial([[0.0]]) == x**2
    assert witness_polynomial([[0.0], [1.0]]).allclose(x**2 * (x - 1) ** 2)
    a, b = Polynomial.variables(2)
    assert witness_polynomial([[0.0, 0.0]]) == a**2 + b**2
    with pytest.raises(ValueError):
        witness_polynomial(np.zeros((0, 2)))


def test_qcqp_recover_halfplane():
    P = halfplane_qcqp()
    res = solve(build_Qn(P, 1))
    rec = qcqp_recover(res.moments, P, 1, res.value)
    assert rec.steps[-1][-1] == "dirac"
    assert np.allclose(rec.measure.points, [[0.5, 0.5]], atol=1e-6)


@pytest.mark.parametrize("n", [2, 3])
def test_qcqp_recover_interval(n):
    P = interval_qcqp()
    res = solve(build_Qn(P, n))
    rec = qcqp_recover(res.moments, P, n, res.value)
    assert rec.order >= 2 and rec.steps[-1][-1] == "flat"
    assert match_points(rec.measure.points, [[-1.0], [1.0]]) <= 1e-5
    assert np.allclose(rec.measure.weights, 0.5, atol=1e-5)


def test_qcqp_recover_exact_moments():
    P = interval_qcqp()
    phi = moments_of_atoms([[-1.0], [1.0]], [0.5, 0.5], 2)
    rec = qcqp_recover(phi, P)
    assert rec.steps == [(2, 2, 2, "flat")]


def test_qcqp_recover_rejects_non_qcqp():
    (x,) = Polynomial.variables(1)
    with pytest.raises(ValueError):
        qcqp_recover(moments_of_atoms([[0.0]], [1.0], 2), Pop(x**4, [1 - x**2]))


def test_qcqp_recover_fails_without_flat_truncation():
    # the uniform-ish measure on 3 points in [-1, 1] is never flat at these orders
    P = interval_qcqp()
    phi = moments_of_atoms([[-1.0], [0.0], [1.0]], [0.3, 0.4, 0.3], 2)
    with pytest.raises(RecoveryFailed):
        qcqp_recover(phi, P, 2, -0.6)


def test_unconstrained_four_minimizers():
    f = four_minimizers()
    res = solve(build_unconstrained(f))
    rec = unconstrained_minimizers(res.moments, f, res.value)
    pts = rec.measure.points
    targets = np.array([[1, 1], [1, -1], [-1, 1], [-1, -1]], dtype=float)
    for p in pts:
        assert np.min(np.linalg.norm(targets - p, axis=1)) <= 1e-4
        assert f(p) <= 1e-5


def test_unconstrained_single_minimizer():
    (x,) = Polynomial.variables(1)
    res = solve(build_unconstrained(x**4))
    rec = unconstrained_minimizers(res.moments, x**4, res.value)
    # x^4 is flat at 0, so solver accuracy 1e-10 in the value leaves ~1e-2 in position
    assert np.all(np.abs(rec.measure.points) <= 2e-2)


def test_homogeneous_extraction_finds_atom_at_infinity():
    # finite atoms plus a point at infinity in direction (1, 2): only top-degree moments see it
    n = 2
    finite = moments_of_atoms([[0.5, -0.5], [-1.0, 0.25]], [0.4, 0.6], n)
    vals = finite.values.copy()
    for i, e in enumerate(monomial_basis(2, 2 * n)):
        if sum(e) == 2 * n:
            vals[i] += 0.3 * (1.0 ** e[0]) * (2.0 ** e[1])
    phi = MomentSequence(2, 2 * n, vals)
    mut = extract_homogeneous_atoms(phi)
    assert mut.residuals["homogeneous moments"] <= 1e-8
    at_inf = np.abs(mut.points[:, 0]) < 1e-6
    assert at_inf.sum() == 1
    u = mut.points[at_inf][0, 1:]
    assert abs(u[0] * 2.0 - u[1]) <= 1e-6 * np.linalg.norm(u)  # direction (1, 2)
    # weight * u^a must reproduce 0.3 * (1, 2)^a on the top degree
    assert mut.weights[at_inf][0] * u[0] ** 4 == pytest.approx(0.3, rel=1e-6)
    deh = dehomogenize(mut, n)
    assert deh.discarded == 1 and deh.discarded_mass > 0
    assert match_points(deh.measure.points, [[0.5, -0.5], [-1.0, 0.25]]) <= 1e-6
    assert verify_moments(deh.measure, phi, 2 * n - 1).residual <= 1e-8


def test_transform_identity_chart():
    phi = moments_of_atoms([[0.5, -0.5], [1.0, 2.0]], [0.4, 0.6], 2)
    assert np.allclose(transform_hom_moments(phi, np.eye(3)).values, phi.values)
