"""Block shapes and concrete matrix-unit systems.

A shape [k_1, ..., k_r] describes a multi-block algebra whose block s is a
full k_s x k_s matrix algebra.  A matrix-unit system realizes the blocks as
explicit ambient matrices e_ij^(s), indexed 1-based by (s, i, j).
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass
from typing import Dict, Iterator, Sequence, Tuple

import numpy as np

from .errors import DimensionMismatch
from .linalg import as_operator, frobenius, identity, matrix_to_json, op_norm

Shape = Tuple[int, ...]


def normalize_shape(blocks: Sequence[int]) -> Shape:
    shape = tuple(int(k) for k in blocks)
    if not shape or any(k < 1 for k in shape):
        raise DimensionMismatch(f"shape must be nonempty positive block sizes, got {blocks}")
    return shape


def rank(blocks: Sequence[int]) -> int:
    """Sum of the block sizes."""
    return sum(normalize_shape(blocks))


def subrank(blocks: Sequence[int]) -> int:
    """Smallest block size."""
    return min(normalize_shape(blocks))


@dataclass(frozen=True)
class UnitalEmbedding:
    """Multiplicity data c_s for a unital copy of a shape inside M_target."""

    shape: Shape
    multiplicities: Tuple[int, ...]
    target_dim: int

    def __post_init__(self):
        shape = normalize_shape(self.shape)
        mult = tuple(int(c) for c in self.multiplicities)
        object.__setattr__(self, "shape", shape)
        object.__setattr__(self, "multiplicities", mult)
        if len(mult) != len(shape) or any(c < 1 for c in mult):
            raise DimensionMismatch(f"need one positive multiplicity per block, got {mult}")
        total = sum(c * k for c, k in zip(mult, shape))
        if total != self.target_dim:
            raise DimensionMismatch(
                f"multiplicities {mult} embed shape {shape} into dimension {total}, "
                f"not {self.target_dim}"
            )

    @staticmethod
    def minimal(shape: Sequence[int]) -> "UnitalEmbedding":
        s = normalize_shape(shape)
        return UnitalEmbedding(s, tuple(1 for _ in s), sum(s))


@dataclass
class MatrixUnitSystem:
    """Family of ambient matrices e_ij^(s); may be exact or approximate.

    ``unital`` records whether the diagonal units are meant to sum to the
    ambient identity (partial systems produced mid-recovery are not).
    """

    shape: Shape
    ambient_dim: int
    units: Dict[Tuple[int, int, int], np.ndarray]
    unital: bool = True

    def __post_init__(self):
        self.shape = normalize_shape(self.shape)
        for key, mat in self.units.items():
            m = as_operator(mat)
            if m.shape[0] != self.ambient_dim:
                raise DimensionMismatch(
                    f"unit {key} has dimension {m.shape[0]}, ambient is {self.ambient_dim}"
                )
            self.units[key] = m

    @property
    def num_blocks(self) -> int:
        return len(self.shape)

    def unit(self, s: int, i: int, j: int) -> np.ndarray:
        return self.units[(s, i, j)]

    def keys(self):
        return sorted(self.units.keys())

    def iter_units(self) -> Iterator[Tuple[Tuple[int, int, int], np.ndarray]]:
        for key in self.keys():
            yield key, self.units[key]

    def diagonal_sum(self) -> np.ndarray:
        out = np.zeros((self.ambient_dim, self.ambient_dim), dtype=np.complex128)
        for s, k in enumerate(self.shape, start=1):
            for i in range(1, k + 1):
                unit = self.units.get((s, i, i))
                if unit is not None:
                    out = out + unit
        return out

    def corner_row_projection(self, rows_by_block: Sequence[int]) -> np.ndarray:
        out = np.zeros((self.ambient_dim, self.ambient_dim), dtype=np.complex128)
        for s, row in enumerate(rows_by_block, start=1):
            out += self.units[(s, row, row)]
        return out

    def to_json(self) -> list:
        return [
            {"s": s, "i": i, "j": j, "matrix": matrix_to_json(mat)}
            for (s, i, j), mat in self.iter_units()
        ]


def canonical_units(shape: Sequence[int], embedding: UnitalEmbedding | None = None) -> MatrixUnitSystem:
    """Exact unital system for a shape under a multiplicity embedding.

    Block s occupies a contiguous diagonal window of size c_s * k_s; its
    unit e_ij is the elementary matrix E_ij amplified c_s-fold, so every
    unit has rank c_s and the diagonal units sum to the identity.
    """
    shape = normalize_shape(shape)
    if embedding is None:
        embedding = UnitalEmbedding.minimal(shape)
    if embedding.shape != shape:
        raise DimensionMismatch(f"embedding shape {embedding.shape} does not match {shape}")
    dim = embedding.target_dim
    units: Dict[Tuple[int, int, int], np.ndarray] = {}
    offset = 0
    for s, (k, c) in enumerate(zip(shape, embedding.multiplicities), start=1):
        amp = np.eye(c)
        for i in range(1, k + 1):
            for j in range(1, k + 1):
                e = np.zeros((k, k))
                e[i - 1, j - 1] = 1.0
                block = np.kron(e, amp)
                mat = np.zeros((dim, dim), dtype=np.complex128)
                span = k * c
                mat[offset : offset + span, offset : offset + span] = block
                units[(s, i, j)] = mat
        offset += k * c
    return MatrixUnitSystem(shape=shape, ambient_dim=dim, units=units, unital=True)


@dataclass
class UnitDefects:
    """Worst-case deviations from the exact matrix-unit relations."""

    adjoint: float
    unitality: float
    multiplication: float

    def max(self) -> float:
        return max(self.adjoint, self.unitality, self.multiplication)

    def to_json(self) -> dict:
        return {
            "adjoint": self.adjoint,
            "unitality": self.unitality,
            "multiplication": self.multiplication,
        }


_SKIP = object()


def _expected_product(shape, key_a, key_b, units):
    """Expected value of a unit product: a matched in-block pair multiplies to
    the composite unit, everything else to zero.  Pairs whose composite is
    absent from a partial system cannot be scored and are skipped."""
    s, i, j = key_a
    s1, i1, j1 = key_b
    if s == s1 and j == i1:
        return units.get((s, i, j1), _SKIP)
    return None


def unit_defects(system: MatrixUnitSystem, exact_eval_limit: int = 512) -> UnitDefects:
    """Measure adjoint, unitality and multiplication defects.

    Multiplication covers both the in-block product rule and the vanishing
    of cross-block (or mismatched-index) products.  All-pairs products are
    screened with Frobenius norms; the worst candidates are then re-measured
    in operator norm.  Frobenius dominates operator norm, so the screening
    threshold max_F / sqrt(dim) cannot discard the true maximizer.
    """
    keys = system.keys()
    mats = np.stack([system.units[k] for k in keys])
    n, d, _ = mats.shape

    adj = 0.0
    for s, i, j in keys:
        adj = max(adj, op_norm(system.units[(s, i, j)].conj().T - system.units[(s, j, i)]))

    unitality = op_norm(system.diagonal_sum() - identity(d))

    # Frobenius screen over all ordered pairs, chunked on the left factor.
    flat_right = mats.transpose(1, 0, 2).reshape(d, n * d)
    top: list = []  # min-heap of (fro, left_idx, right_idx)
    order = 0
    for li in range(n):
        prods = (mats[li] @ flat_right).reshape(d, n, d).transpose(1, 0, 2)
        for ri in range(n):
            expected = _expected_product(system.shape, keys[li], keys[ri], system.units)
            if expected is _SKIP:
                continue
            resid = prods[ri] if expected is None else prods[ri] - expected
            f = frobenius(resid)
            order += 1
            if len(top) < exact_eval_limit:
                heapq.heappush(top, (f, order, li, ri))
            elif f > top[0][0]:
                heapq.heapreplace(top, (f, order, li, ri))
    mult = 0.0
    for _, _, li, ri in top:
        expected = _expected_product(system.shape, keys[li], keys[ri], system.units)
        resid = mats[li] @ mats[ri]
        if expected is not None and expected is not _SKIP:
            resid = resid - expected
        mult = max(mult, op_norm(resid))
    return UnitDefects(adjoint=float(adj), unitality=float(unitality), multiplication=float(mult))
