"""Truncated towers of mutually commuting embedded block algebras.

A depth-L tower lives in the tensor product of one full matrix factor per
level; block m's units act on factor m and commute with every other level
exactly by construction.  Hermitian generators x_1..x_n are produced by
seeded recipes that keep their distance to each level's commutant inside
the 2^-m margin the construction needs.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass
from typing import List, Sequence, Tuple

import numpy as np

from .errors import DimensionMismatch, DimensionOverflow, StrictModeViolation
from .linalg import DEFAULT_DIM_CAP, frobenius, hermitian_part, identity, op_norm
from .units import MatrixUnitSystem, Shape, canonical_units, normalize_shape, rank, subrank

DISTANCE_MARGIN = 0.75  # fraction of the 2^-m budget the recipes actually spend


@dataclass(frozen=True)
class TowerSpec:
    block_shapes: Tuple[Shape, ...]
    num_generators: int = 1
    mode: str = "strict"
    generator_seed: int = 7
    generator_recipe: str = "leading-factor"

    def __post_init__(self):
        shapes = tuple(normalize_shape(s) for s in self.block_shapes)
        object.__setattr__(self, "block_shapes", shapes)
        if not shapes:
            raise DimensionMismatch("tower needs at least one level")
        if self.num_generators < 1:
            raise DimensionMismatch("tower needs at least one generator")
        if self.mode not in ("strict", "relaxed"):
            raise DimensionMismatch(f"unknown mode {self.mode!r}")
        if self.generator_recipe not in ("leading-factor", "uhf"):
            raise DimensionMismatch(f"unknown recipe {self.generator_recipe!r}")

    @property
    def depth(self) -> int:
        return len(self.block_shapes)

    def to_json(self) -> dict:
        return {
            "shapes": [list(s) for s in self.block_shapes],
            "generators": self.num_generators,
            "mode": self.mode,
            "seed": self.generator_seed,
            "recipe": self.generator_recipe,
        }

    @staticmethod
    def from_json(obj: dict) -> "TowerSpec":
        return TowerSpec(
            block_shapes=tuple(tuple(s) for s in obj["shapes"]),
            num_generators=int(obj.get("generators", 1)),
            mode=obj.get("mode", "strict"),
            generator_seed=int(obj.get("seed", 7)),
            generator_recipe=obj.get("recipe", "leading-factor"),
        )


def index_set_cardinality(shapes: Sequence[Shape], level: int) -> int:
    """Number of cross-level index atoms available below ``level``."""
    card = 1
    for shape in shapes[: level - 1]:
        card *= rank(shape) ** 2
    return card


def required_subrank_strict(shapes: Sequence[Shape], level: int) -> int:
    if level == 1:
        return 3
    return level * index_set_cardinality(shapes, level) + 3


def required_subrank_relaxed(shapes: Sequence[Shape], level: int, num_generators: int) -> int:
    if level == 1:
        return 3
    active = min(level, num_generators)
    return active * index_set_cardinality(shapes, level) + 3


@dataclass
class TowerModel:
    spec: TowerSpec
    ambient_dim: int
    blocks: List[MatrixUnitSystem]
    generators: List[np.ndarray]
    identity: np.ndarray
    factor_dims: Tuple[int, ...]

    @property
    def depth(self) -> int:
        return len(self.blocks)

    def block_rank(self, level: int) -> int:
        return rank(self.blocks[level - 1].shape)


def _embed_factor(x: np.ndarray, factor_dims: Sequence[int], position: int) -> np.ndarray:
    before = int(np.prod(factor_dims[:position], dtype=np.int64)) if position else 1
    after_dims = factor_dims[position + 1 :]
    after = int(np.prod(after_dims, dtype=np.int64)) if after_dims else 1
    out = x
    if before > 1:
        out = np.kron(np.eye(before), out)
    if after > 1:
        out = np.kron(out, np.eye(after))
    return out.astype(np.complex128)


def commutant_projection(x: np.ndarray, block: MatrixUnitSystem) -> np.ndarray:
    """Average x against the block's units: E(x) = sum_s (1/k_s) sum_ij e_ij x e_ji.

    The output commutes with every unit of the block, E is idempotent and a
    contraction, and it fixes anything already in the commutant.
    """
    if x.shape[0] != block.ambient_dim:
        raise DimensionMismatch(
            f"operand dimension {x.shape[0]} does not match ambient {block.ambient_dim}"
        )
    out = np.zeros_like(x, dtype=np.complex128)
    for s, k in enumerate(block.shape, start=1):
        acc = np.zeros_like(out)
        for i in range(1, k + 1):
            for j in range(1, k + 1):
                e_ij = block.unit(s, i, j)
                acc += e_ij @ x @ block.unit(s, j, i)
        out += acc / k
    return out


def _screened_max_commutator(left: List[np.ndarray], right: List[np.ndarray]) -> float:
    """Max operator norm of [u, v] over the two unit families.

    Frobenius screening first; operator norms only for candidates that can
    still hold the maximum (op <= fro <= sqrt(dim) * op).
    """
    if not left or not right:
        return 0.0
    d = left[0].shape[0]
    heap: list = []
    order = 0
    lstack = np.stack(left)
    rstack = np.stack(right).transpose(1, 0, 2).reshape(d, -1)
    for li, u in enumerate(lstack):
        uv = (u @ rstack).reshape(d, len(right), d).transpose(1, 0, 2)
        for ri, v in enumerate(right):
            comm = uv[ri] - v @ u
            f = frobenius(comm)
            order += 1
            if len(heap) < 64:
                heapq.heappush(heap, (f, order, li, ri))
            elif f > heap[0][0]:
                heapq.heapreplace(heap, (f, order, li, ri))
    best = 0.0
    for _, _, li, ri in heap:
        u, v = left[li], right[ri]
        best = max(best, op_norm(u @ v - v @ u))
    return best


def _draw_hermitian(rng: np.random.Generator, dim: int) -> np.ndarray:
    g = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
    return hermitian_part(g)


def _block_traceless(h: np.ndarray, shape: Shape) -> np.ndarray:
    """Remove the per-block averaged part so every block trace vanishes."""
    out = h.copy()
    offset = 0
    for k in shape:
        tr = np.trace(out[offset : offset + k, offset : offset + k]) / k
        out[offset : offset + k, offset : offset + k] -= tr * np.eye(k)
        offset += k
    return out


def _leading_factor_generators(spec: TowerSpec, factor_dims, blocks) -> List[np.ndarray]:
    """Seeded Hermitian contractions on the first tensor factor.

    The part of each generator that fails to commute with block 1 is scaled
    to spend only DISTANCE_MARGIN of the 2^-1 budget; deeper levels commute
    exactly because the support stays on factor 1.
    """
    seeds = np.random.SeedSequence(spec.generator_seed).spawn(spec.num_generators)
    gens = []
    d1 = factor_dims[0]
    for seq in seeds:
        rng = np.random.default_rng(seq)
        w_small = _draw_hermitian(rng, d1)
        w_small = w_small / max(op_norm(w_small), 1e-300) + 0.3 * np.eye(d1)
        w = _embed_factor(w_small, factor_dims, 0)
        core = commutant_projection(w, blocks[0])
        dev = w - core
        dev_norm = op_norm(dev)
        x = core.copy()
        if dev_norm > 1e-12:
            x = core + (DISTANCE_MARGIN * 0.5) * dev / dev_norm
        nrm = op_norm(x)
        if nrm > 1.0:
            x = x / nrm
        gens.append(hermitian_part(x))
    return gens


def _uhf_generators(spec: TowerSpec, factor_dims, blocks) -> List[np.ndarray]:
    """Finite sums of weighted tensor words across the factors.

    Each word carries block-traceless slots, so it is annihilated by the
    commutant projection of every level it touches; per-level coefficient
    budgets keep the distances inside DISTANCE_MARGIN * 2^-m.
    """
    depth = len(factor_dims)
    seeds = np.random.SeedSequence(spec.generator_seed).spawn(spec.num_generators)
    gens = []
    for seq in seeds:
        rng = np.random.default_rng(seq)
        num_words = 2 * depth
        words = []
        supports = []
        for _ in range(num_words):
            mask = rng.random(depth) < 0.5
            if not mask.any():
                mask[rng.integers(depth)] = True
            support = [m for m in range(depth) if mask[m]]
            word = np.eye(1, dtype=np.complex128)
            for m in range(depth):
                if m in support:
                    h = _block_traceless(_draw_hermitian(rng, factor_dims[m]), spec.block_shapes[m])
                    h = h / max(op_norm(h), 1e-300)
                else:
                    h = np.eye(factor_dims[m])
                word = np.kron(word, h)
            words.append(word)
            supports.append(support)
        raw = rng.uniform(0.2, 1.0, size=num_words) * rng.choice([-1.0, 1.0], size=num_words)
        scale = np.inf
        for m in range(depth):
            load = sum(abs(raw[t]) for t in range(num_words) if m in supports[t])
            if load > 0:
                scale = min(scale, DISTANCE_MARGIN * 2.0 ** (-(m + 1)) / load)
        coeffs = raw * (scale if np.isfinite(scale) else 0.0)
        x = 0.25 * identity(int(np.prod(factor_dims, dtype=np.int64)))
        for c, word in zip(coeffs, words):
            x = x + c * word
        nrm = op_norm(x)
        if nrm > 1.0:
            x = x / nrm
        gens.append(hermitian_part(x))
    return gens


def build_tower(spec: TowerSpec, dim_cap: int = DEFAULT_DIM_CAP) -> TowerModel:
    """Realize a tower spec as commuting tensor-factor blocks plus generators."""
    shapes = spec.block_shapes
    factor_dims = tuple(rank(s) for s in shapes)
    ambient = 1
    for d in factor_dims:
        ambient *= d
        if ambient > dim_cap:
            raise DimensionOverflow(
                f"tower ambient dimension {ambient}+ exceeds cap {dim_cap}"
            )
    if spec.mode == "strict":
        for level, shape in enumerate(shapes, start=1):
            need = required_subrank_strict(shapes, level)
            if subrank(shape) < need:
                raise StrictModeViolation(
                    f"level {level} subrank {subrank(shape)} below strict bound {need}"
                )
    blocks = []
    for pos, shape in enumerate(shapes):
        small = canonical_units(shape)
        units = {
            key: _embed_factor(mat, factor_dims, pos) for key, mat in small.units.items()
        }
        blocks.append(
            MatrixUnitSystem(shape=shape, ambient_dim=ambient, units=units, unital=True)
        )
    if spec.generator_recipe == "leading-factor":
        gens = _leading_factor_generators(spec, factor_dims, blocks)
    else:
        gens = _uhf_generators(spec, factor_dims, blocks)
    return TowerModel(
        spec=spec,
        ambient_dim=ambient,
        blocks=blocks,
        generators=gens,
        identity=identity(ambient),
        factor_dims=factor_dims,
    )


@dataclass
class CommutantWitness:
    """Per-level commuting approximants y_j and their distances to the x_j."""

    level: int
    approximants: List[np.ndarray]
    distances: List[float]


def witnesses_at_level(model: TowerModel, level: int) -> CommutantWitness:
    block = model.blocks[level - 1]
    active = min(level, len(model.generators))
    approx = []
    dists = []
    for j in range(active):
        y = hermitian_part(commutant_projection(model.generators[j], block))
        approx.append(y)
        dists.append(op_norm(model.generators[j] - y))
    return CommutantWitness(level=level, approximants=approx, distances=dists)


@dataclass
class LevelConditionRow:
    level: int
    unitality_defect: float
    max_cross_commutator: float
    subrank: int
    required_subrank: int
    growth_ok: bool
    distances: List[dict]

    def to_json(self) -> dict:
        return {
            "level": self.level,
            "unitality_defect": self.unitality_defect,
            "max_cross_commutator": self.max_cross_commutator,
            "subrank": self.subrank,
            "required_subrank": self.required_subrank,
            "growth_ok": self.growth_ok,
            "distances": self.distances,
        }


@dataclass
class ConditionReport:
    rows: List[LevelConditionRow]
    interleaving_note: str
    passed: bool

    def to_json(self) -> dict:
        return {
            "levels": [r.to_json() for r in self.rows],
            "interleaving": self.interleaving_note,
            "pass": self.passed,
        }


def check_conditions(model: TowerModel) -> ConditionReport:
    """Measure unitality, cross-level commutation, growth bounds and distances."""
    spec = model.spec
    shapes = spec.block_shapes
    rows = []
    ok = True
    all_units = [[mat for _, mat in blk.iter_units()] for blk in model.blocks]
    for level in range(1, model.depth + 1):
        blk = model.blocks[level - 1]
        unitality = op_norm(blk.diagonal_sum() - model.identity)
        cross = 0.0
        for other in range(level + 1, model.depth + 1):
            cross = max(
                cross,
                _screened_max_commutator(all_units[level - 1], all_units[other - 1]),
            )
        if spec.mode == "strict":
            need = required_subrank_strict(shapes, level)
        else:
            need = required_subrank_relaxed(shapes, level, spec.num_generators)
        growth_ok = subrank(shapes[level - 1]) >= need
        witness = witnesses_at_level(model, level)
        bound = 2.0 ** (-level)
        distances = [
            {
                "generator": j + 1,
                "distance": witness.distances[j],
                "bound": bound,
                "ok": witness.distances[j] < bound,
            }
            for j in range(len(witness.distances))
        ]
        row = LevelConditionRow(
            level=level,
            unitality_defect=float(unitality),
            max_cross_commutator=float(cross),
            subrank=subrank(shapes[level - 1]),
            required_subrank=need,
            growth_ok=growth_ok,
            distances=distances,
        )
        rows.append(row)
        ok = ok and growth_ok and unitality <= 1e-12 and cross <= 1e-12
        ok = ok and all(dd["ok"] for dd in distances)
    return ConditionReport(
        rows=rows,
        interleaving_note="interleaving indices satisfied by tensor construction",
        passed=ok,
    )
