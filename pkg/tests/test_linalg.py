import numpy as np
import pytest

from towergen.errors import DimensionMismatch, DimensionOverflow, EigenvalueNearThreshold
from towergen.linalg import (
    as_operator,
    direct_sum,
    identity,
    kron,
    matrix_from_json,
    matrix_to_json,
    op_norm,
    polar_partial_isometry,
    require_hermitian,
    spectral_projection,
    tuple_norm,
)


def random_complex(rng, d):
    return rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))


def test_op_norm_identity():
    assert op_norm(identity(3)) == pytest.approx(1.0, abs=1e-14)


def test_op_norm_hermitian_diagonal():
    assert op_norm(np.diag([1.0, -2.0])) == pytest.approx(2.0, abs=1e-14)


def test_op_norm_rank_one():
    assert op_norm(np.array([[0.0, 3.0], [0.0, 0.0]])) == pytest.approx(3.0, abs=1e-14)


def test_op_norm_zero():
    assert op_norm(np.zeros((4, 4))) == 0.0


def test_tuple_norm_examples():
    assert tuple_norm([identity(2), np.zeros((2, 2))]) == pytest.approx(1.0)
    assert tuple_norm([np.diag([1.0, -2.0]), np.diag([0.5, 0.0])]) == pytest.approx(2.0)
    a = np.array([[1.0, 2.0], [0.0, 1.0]])
    assert tuple_norm([a]) == pytest.approx(op_norm(a))


def test_tuple_norm_rejects_mixed_dims():
    with pytest.raises(DimensionMismatch):
        tuple_norm([identity(2), identity(3)])
    with pytest.raises(DimensionMismatch):
        tuple_norm([])


def test_spectral_projection_diagonal():
    p = spectral_projection(np.diag([1.0, 0.0]), 0.5)
    assert np.allclose(p, np.diag([1.0, 0.0]), atol=1e-14)
    p = spectral_projection(np.diag([0.9, 0.1, 0.95]), 0.5)
    assert np.allclose(p, np.diag([1.0, 0.0, 1.0]), atol=1e-14)


def test_spectral_projection_gap_violation():
    with pytest.raises(EigenvalueNearThreshold):
        spectral_projection(np.diag([0.5 + 1e-9, 0.1]), 0.5)


def test_spectral_projection_is_projection():
    rng = np.random.default_rng(3)
    for _ in range(10):
        h = random_complex(rng, 5)
        h = (h + h.conj().T) / 2
        p = spectral_projection(h, 0.0) if np.min(np.abs(np.linalg.eigvalsh(h))) > 1e-8 else None
        if p is None:
            continue
        assert op_norm(p @ p - p) <= 1e-12
        assert op_norm(p - p.conj().T) <= 1e-12


def test_polar_partial_isometry_examples():
    v = polar_partial_isometry(np.array([[0.0, 2.0], [0.0, 0.0]]), 0.5)
    assert np.allclose(v, [[0.0, 1.0], [0.0, 0.0]], atol=1e-14)
    u = np.array([[0.0, 1.0], [1.0, 0.0]], dtype=complex)
    assert np.allclose(polar_partial_isometry(u, 0.5), u, atol=1e-14)
    z = polar_partial_isometry(np.zeros((3, 3)), 0.5)
    assert np.allclose(z, np.zeros((3, 3)))


def test_polar_partial_isometry_invariants():
    rng = np.random.default_rng(5)
    for _ in range(10):
        a = random_complex(rng, 4)
        v = polar_partial_isometry(a, 0.5)
        assert op_norm(v @ v.conj().T @ v - v) <= 1e-12
        # discarded singular directions are below the cutoff
        assert op_norm(a - v @ v.conj().T @ a) <= 0.5 + 1e-12
        big = a + 3 * identity(4)  # all singular values above the cutoff now?
        if np.min(np.linalg.svd(big, compute_uv=False)) > 0.5:
            vb = polar_partial_isometry(big, 0.5)
            assert op_norm(vb.conj().T @ vb - identity(4)) <= 1e-12


def test_kron_examples():
    assert np.allclose(kron(identity(2), identity(3)), identity(6))
    assert np.allclose(kron(np.diag([1.0, 2.0]), identity(2)), np.diag([1.0, 1.0, 2.0, 2.0]))


def test_kron_norm_multiplicative():
    rng = np.random.default_rng(11)
    for _ in range(10):
        a, b = random_complex(rng, 2), random_complex(rng, 2)
        assert abs(op_norm(kron(a, b)) - op_norm(a) * op_norm(b)) <= 1e-10


def test_kron_distributes_over_product():
    rng = np.random.default_rng(13)
    for d in (2, 3):
        a, b, c, e = (random_complex(rng, d) for _ in range(4))
        lhs = kron(a, b) @ kron(c, e)
        rhs = kron(a @ c, b @ e)
        assert op_norm(lhs - rhs) <= 1e-12


def test_kron_overflow():
    with pytest.raises(DimensionOverflow):
        kron(identity(70), identity(70), dim_cap=4096)


def test_direct_sum_examples():
    assert np.allclose(direct_sum([identity(2), identity(3)]), identity(5))
    d = direct_sum([np.diag([1.0]), np.diag([-2.0])])
    assert np.allclose(d, np.diag([1.0, -2.0]))
    assert op_norm(d) == pytest.approx(2.0)


def test_direct_sum_norm_is_max():
    rng = np.random.default_rng(17)
    for _ in range(5):
        blocks = [random_complex(rng, d) for d in (2, 3, 4)]
        assert abs(op_norm(direct_sum(blocks)) - max(op_norm(b) for b in blocks)) <= 1e-12


def test_cstar_identity_and_submultiplicativity():
    rng = np.random.default_rng(19)
    for _ in range(10):
        a, b = random_complex(rng, 4), random_complex(rng, 4)
        assert abs(op_norm(a.conj().T @ a) - op_norm(a) ** 2) <= 1e-10
        assert op_norm(a @ b) <= op_norm(a) * op_norm(b) + 1e-12


def test_adjoint_involution():
    rng = np.random.default_rng(23)
    a = random_complex(rng, 4)
    assert np.array_equal(a.conj().T.conj().T, a)


def test_require_hermitian():
    require_hermitian(np.diag([1.0, 2.0]))
    with pytest.raises(DimensionMismatch):
        require_hermitian(np.array([[0.0, 1.0], [0.0, 0.0]]))


def test_as_operator_rejects_non_square():
    with pytest.raises(DimensionMismatch):
        as_operator(np.zeros((2, 3)))


def test_matrix_json_round_trip():
    rng = np.random.default_rng(29)
    a = random_complex(rng, 3)
    obj = matrix_to_json(a)
    assert obj["dim"] == 3
    assert len(obj["entries"]) == 9
    back = matrix_from_json(obj)
    assert np.array_equal(back, a)
