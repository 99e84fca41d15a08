from fractions import Fraction

import numpy as np
import pytest

from towergen.errors import DimensionMismatch, IndexOutOfRange
from towergen.linalg import identity, op_norm
from towergen.microstates import (
    CoveringEstimate,
    MicrostateSpec,
    NcPolynomial,
    build_test_element,
    check_unitary_bounds,
    compression_dimension,
    enumerate_multiplicities,
    eval_poly,
    gamma_member,
    greedy_cover,
    greedy_packing,
    haar_unitary,
    orbit_cloud,
    pinching_defect,
)
from towergen.units import UnitalEmbedding, canonical_units


def x1() -> NcPolynomial:
    return NcPolynomial.from_pairs([(1, (1,))])


def test_eval_poly_single_letter():
    a = np.diag([1.0, 2.0]).astype(complex)
    assert np.allclose(eval_poly(x1(), [a]), a)


def test_eval_poly_unit_term():
    p = NcPolynomial.from_pairs([(1, ())])
    assert np.allclose(eval_poly(p, [np.zeros((3, 3))]), identity(3))


def test_eval_poly_commutator():
    p = NcPolynomial.from_pairs([(1, (1, 2)), (-1, (2, 1))])
    a = np.diag([1.0, 2.0]).astype(complex)
    b = np.diag([3.0, -1.0]).astype(complex)
    assert op_norm(eval_poly(p, [a, b])) <= 1e-14


def test_eval_poly_index_error():
    with pytest.raises(IndexOutOfRange):
        eval_poly(NcPolynomial.from_pairs([(1, (2,))]), [identity(2)])


def test_poly_json_round_trip():
    p = NcPolynomial(terms=((Fraction(1, 3), Fraction(-2, 7), (1, 1, 2)),))
    assert NcPolynomial.from_json(p.to_json()) == p


def test_gamma_self_witness():
    rng = np.random.default_rng(0)
    a = rng.standard_normal((3, 3)) + 1j * rng.standard_normal((3, 3))
    a = (a + a.conj().T) / 2
    polys = [x1(), NcPolynomial.from_pairs([(1, (1, 1))])]
    targets = [op_norm(eval_poly(p, [a])) for p in polys]
    spec = MicrostateSpec(1, 3, 1e-8, polys, targets)
    member, gaps = gamma_member([a], spec)
    assert member and max(gaps) <= 1e-12


def test_gamma_gap_failure():
    eps = 0.1
    a = 2 * eps * identity(2)
    spec = MicrostateSpec(1, 2, eps, [x1()], [0.0])
    member, gaps = gamma_member([a], spec)
    assert not member
    assert gaps[0] == pytest.approx(2 * eps)


def test_gamma_monotone_in_epsilon():
    a = np.diag([0.3, -0.2]).astype(complex)
    spec_small = MicrostateSpec(1, 2, 0.05, [x1()], [0.32])
    spec_large = MicrostateSpec(1, 2, 0.5, [x1()], [0.32])
    member_small, _ = gamma_member([a], spec_small)
    member_large, _ = gamma_member([a], spec_large)
    assert member_small  # gap 0.02 < 0.05
    assert member_large


def test_gamma_t1_amplified_embedding(t1_model):
    x = t1_model.generators[0]
    polys = [x1(), NcPolynomial.from_pairs([(1, (1, 1)), (Fraction(1, 2), ())])]
    targets = [op_norm(eval_poly(p, [x])) for p in polys]
    w = haar_unitary(126, seed=33)
    lifted = w.conj().T @ np.kron(x, identity(2)) @ w
    gaps = [abs(op_norm(eval_poly(p, [lifted])) - t) for p, t in zip(polys, targets)]
    eps = 2 * max(max(gaps), 1e-14)
    spec = MicrostateSpec(1, 126, eps, polys, targets)
    member, _ = gamma_member([lifted], spec)
    assert member


def test_haar_scalar_case():
    u = haar_unitary(1, seed=4)
    assert abs(abs(u[0, 0]) - 1.0) <= 1e-12


def test_haar_unitarity():
    for seed in range(20):
        u = haar_unitary(8, seed=seed)
        assert op_norm(u.conj().T @ u - identity(8)) <= 1e-12


def test_haar_trace_moment():
    vals = [abs(np.trace(haar_unitary(4, seed=s))) ** 2 for s in range(2000)]
    assert np.mean(vals) == pytest.approx(1.0, abs=0.1)


def test_orbit_cloud_central():
    cloud = orbit_cloud(identity(3), count=5, seed=1)
    for w in cloud:
        assert op_norm(w - identity(3)) <= 1e-12


def test_orbit_cloud_projections():
    a = np.diag([1.0, 0.0]).astype(complex)
    cloud = orbit_cloud(a, count=100, seed=2)
    for m in cloud:
        eigs = np.sort(np.linalg.eigvalsh(m))
        assert np.allclose(eigs, [0.0, 1.0], atol=1e-10)


def test_orbit_cloud_spectrum_preserved():
    rng = np.random.default_rng(3)
    h = rng.standard_normal((5, 5)) + 1j * rng.standard_normal((5, 5))
    h = (h + h.conj().T) / 2
    ref = np.sort(np.linalg.eigvalsh(h))
    for m in orbit_cloud(h, count=20, seed=5):
        assert np.max(np.abs(np.sort(np.linalg.eigvalsh(m)) - ref)) <= 1e-10


def test_packing_identical_points():
    cloud = [identity(2)] * 12
    est = greedy_packing(cloud, 0.5)
    assert est.packing_count == 1


def test_packing_boundary_rule():
    cloud = [np.zeros((1, 1)), np.array([[0.5]])]
    est = greedy_packing(cloud, 0.5)
    assert est.packing_count == 2


def test_packing_unitary_invariance():
    rng = np.random.default_rng(7)
    cloud = [np.diag([1.0, t]).astype(complex) for t in rng.uniform(-1, 1, 40)]
    u = haar_unitary(2, seed=9)
    rotated = [u.conj().T @ m @ u for m in cloud]
    assert greedy_packing(cloud, 0.3).packing_count == greedy_packing(rotated, 0.3).packing_count


def test_cover_trivial_cases():
    assert greedy_cover([identity(2)], 0.1) == 1
    cloud = [np.array([[0.0]]), np.array([[0.01]]), np.array([[0.02]])]
    assert greedy_cover(cloud, 0.5) == 1
    circle = [np.array([[np.exp(2j * np.pi * t / 64)]]) for t in range(64)]
    assert greedy_cover(circle, 2.1) == 1


def test_unitary_bounds_k1():
    circle = [np.array([[np.exp(2j * np.pi * t / 4096)]]) for t in range(4096)]
    est_05 = greedy_packing(circle, 1.0)
    rep = check_unitary_bounds(1, 0.5, est_05)
    assert rep.paper_upper == pytest.approx((9 * np.pi * np.e / 0.5), rel=1e-12)
    assert not rep.upper_violated
    assert rep.certified_lower <= rep.paper_upper
    est_025 = greedy_packing(circle, 0.5)
    rep = check_unitary_bounds(1, 0.25, est_025)
    assert rep.certified_lower >= 4
    assert rep.lower_status == "consistent"


def test_unitary_bounds_k2_trivial():
    cloud = [haar_unitary(2, seed=s) for s in range(50)]
    est = greedy_packing(cloud, 2.0)
    rep = check_unitary_bounds(2, 1.0, est)
    assert rep.paper_lower == 1.0
    assert rep.certified_lower >= 1


def test_unitary_bounds_radius_mismatch():
    est = CoveringEstimate(1.0, 10, 3, 3, 4)
    with pytest.raises(DimensionMismatch):
        check_unitary_bounds(1, 0.3, est)


def numeric_pinched_dimension(shape, mult, k):
    """Independent oracle: real rank of the pinching map on a Hermitian basis."""
    units = canonical_units(shape, UnitalEmbedding(shape, mult, k))
    diags = [
        units.unit(s, i, i)
        for s, size in enumerate(shape, start=1)
        for i in range(1, size + 1)
    ]
    basis = []
    for i in range(k):
        e = np.zeros((k, k), dtype=complex)
        e[i, i] = 1.0
        basis.append(e)
        for j in range(i + 1, k):
            e = np.zeros((k, k), dtype=complex)
            e[i, j] = e[j, i] = 1.0
            basis.append(e)
            f = np.zeros((k, k), dtype=complex)
            f[i, j] = -1j
            f[j, i] = 1j
            basis.append(f)
    cols = []
    for h in basis:
        pinched = sum(p @ h @ p for p in diags)
        cols.append(np.concatenate([pinched.real.reshape(-1), pinched.imag.reshape(-1)]))
    return int(np.linalg.matrix_rank(np.array(cols).T, tol=1e-9))


def test_compression_dimension_examples():
    emb = UnitalEmbedding((2, 3), (1, 1), 5)
    check = compression_dimension((2, 3), emb, 2)
    assert check.dim == 5
    assert check.bound_holds
    assert check.dim == numeric_pinched_dimension((2, 3), (1, 1), 5)


def test_compression_dimension_tight_case():
    n = 4
    emb = UnitalEmbedding((n,), (1,), n)
    check = compression_dimension((n,), emb, n)
    assert check.dim == n
    assert check.cap_value == pytest.approx(n)
    assert check.bound_holds


def test_compression_dimension_numeric_oracle_sweep():
    cases = [((2,), (2,), 4), ((3,), (1,), 3), ((2, 2), (1, 2), 6), ((2, 3), (2, 1), 7)]
    for shape, mult, k in cases:
        emb = UnitalEmbedding(shape, mult, k)
        check = compression_dimension(shape, emb, 2)
        assert check.dim == numeric_pinched_dimension(shape, mult, k)


def test_enumerate_multiplicities_examples():
    mults, rep = enumerate_multiplicities(5, (2, 3))
    assert mults == [(1, 1)]
    assert rep["count"] == 1 and rep["cardinality_cap"] == pytest.approx(6.25)
    mults, _ = enumerate_multiplicities(12, (2, 3))
    assert mults == [(3, 2)]
    mults, _ = enumerate_multiplicities(6, (1, 2, 3))
    assert (1, 1, 1) in mults and all(sum(c * k for c, k in zip(m, (1, 2, 3))) == 6 for m in mults)


def test_enumerate_multiplicities_matches_product_scan():
    shape = (2, 3)
    k = 11
    mults, rep = enumerate_multiplicities(k, shape)
    brute = [
        (c1, c2)
        for c1 in range(1, k + 1)
        for c2 in range(1, k + 1)
        if 2 * c1 + 3 * c2 == k
    ]
    assert sorted(mults) == sorted(brute)
    assert rep["cap_respected"]


def test_build_test_element():
    units = canonical_units([3])
    z = build_test_element((3,), units)
    assert np.allclose(z, np.diag([1.0, 2.0, 3.0]))
    units = canonical_units([2, 2])
    z = build_test_element((2, 2), units)
    assert sorted(np.linalg.eigvalsh(z).round(10)) == [1.0, 2.0, 3.0, 4.0]


def test_test_element_multiplicities():
    shape = (2,)
    emb = UnitalEmbedding(shape, (3,), 6)
    units = canonical_units(shape, emb)
    z = build_test_element(shape, units)
    eigs = np.linalg.eigvalsh(z).round(10)
    assert list(eigs).count(1.0) == 3 and list(eigs).count(2.0) == 3


def test_pinching_defect_bound():
    shape = (2, 3)
    units = canonical_units(shape)
    rng = np.random.default_rng(11)
    diags = [units.unit(s, i, i) for s, k in enumerate(shape, 1) for i in range(1, k + 1)]
    for omega in (0.1, 0.01):
        for _ in range(10):
            h = rng.standard_normal((5, 5)) + 1j * rng.standard_normal((5, 5))
            h = (h + h.conj().T) / 2
            blockdiag = sum(p @ h @ p for p in diags)
            noise = rng.standard_normal((5, 5)) + 1j * rng.standard_normal((5, 5))
            noise = (noise + noise.conj().T) / 2
            noise = omega * noise / op_norm(noise)
            defect = pinching_defect([blockdiag + noise], units)[0]
            assert defect <= 2 * omega + 1e-10
