import numpy as np
import pytest

from towergen.errors import DimensionMismatch
from towergen.linalg import identity, op_norm
from towergen.stabilize import perturb_units
from towergen.units import (
    MatrixUnitSystem,
    UnitalEmbedding,
    canonical_units,
    rank,
    subrank,
    unit_defects,
)


def test_rank_examples():
    assert rank([2, 3]) == 5
    assert rank([3]) == 3
    assert rank([2, 2, 2]) == 6


def test_subrank_examples():
    assert subrank([2, 3]) == 2
    assert subrank([21]) == 21
    assert subrank([5, 2, 9]) == 2


def test_rank_dominates_subrank():
    shapes = [[2], [7], [2, 3], [4, 4, 4], [1, 9]]
    for shape in shapes:
        assert rank(shape) >= subrank(shape)
        assert (rank(shape) == subrank(shape)) == (len(shape) == 1)


def test_invalid_shapes():
    with pytest.raises(DimensionMismatch):
        rank([])
    with pytest.raises(DimensionMismatch):
        subrank([0, 2])


def brute_force_product_table(system: MatrixUnitSystem) -> float:
    """Exhaustive defect of all pairwise product relations."""
    worst = 0.0
    keys = system.keys()
    for s, i, j in keys:
        a = system.unit(s, i, j)
        worst = max(worst, op_norm(a.conj().T - system.unit(s, j, i)))
        for s1, i1, j1 in keys:
            prod = a @ system.unit(s1, i1, j1)
            if s == s1 and j == i1:
                prod = prod - system.unit(s, i, j1)
            worst = max(worst, op_norm(prod))
    worst = max(worst, op_norm(system.diagonal_sum() - identity(system.ambient_dim)))
    return worst


def test_canonical_units_m2_elementary():
    sys2 = canonical_units([2])
    assert np.array_equal(sys2.unit(1, 1, 2), np.array([[0, 1], [0, 0]], dtype=complex))
    assert brute_force_product_table(sys2) <= 1e-15


def test_canonical_units_amplified():
    emb = UnitalEmbedding((2,), (2,), 4)
    sys4 = canonical_units([2], emb)
    for i in range(1, 3):
        for j in range(1, 3):
            assert np.linalg.matrix_rank(sys4.unit(1, i, j)) == 2
    assert np.allclose(sys4.diagonal_sum(), identity(4))
    assert brute_force_product_table(sys4) <= 1e-15


@pytest.mark.parametrize(
    "shape,mult",
    [
        ((2, 3), (1, 1)),
        ((3,), (1,)),
        ((5, 5), (1, 1)),
        ((2, 2, 2), (2, 1, 3)),
        ((4,), (8,)),
    ],
)
def test_canonical_units_product_table(shape, mult):
    target = sum(c * k for c, k in zip(mult, shape))
    assert target <= 32
    system = canonical_units(shape, UnitalEmbedding(shape, mult, target))
    assert brute_force_product_table(system) <= 1e-15


def test_embedding_validation():
    with pytest.raises(DimensionMismatch):
        UnitalEmbedding((2, 3), (1, 1), 6)
    with pytest.raises(DimensionMismatch):
        canonical_units([2, 3], UnitalEmbedding((2, 2), (1, 1), 4))


def test_unit_defects_exact():
    system = canonical_units([2, 3])
    defects = unit_defects(system)
    assert defects.adjoint <= 1e-15
    assert defects.unitality <= 1e-15
    assert defects.multiplication <= 1e-15


def test_unit_defects_perturbed_scaling():
    system = canonical_units([3])
    worst_ratio = 0.0
    for seed in range(10):
        noisy = perturb_units(system, 1e-3, seed)
        defects = unit_defects(noisy)
        worst_ratio = max(worst_ratio, defects.max() / 1e-3)
    assert worst_ratio <= 10.0


def test_unit_defects_non_unital():
    system = canonical_units([2])
    partial = MatrixUnitSystem(
        shape=(2,),
        ambient_dim=2,
        units={
            (1, 1, 1): system.unit(1, 1, 1),
            (1, 1, 2): system.unit(1, 1, 2),
            (1, 2, 1): system.unit(1, 2, 1),
        },
        unital=False,
    )
    defects = unit_defects(partial)
    assert defects.unitality == pytest.approx(1.0, abs=1e-14)


def test_unit_system_serialization():
    system = canonical_units([2])
    payload = system.to_json()
    assert len(payload) == 4
    assert payload[0]["s"] == 1 and payload[0]["matrix"]["dim"] == 2
