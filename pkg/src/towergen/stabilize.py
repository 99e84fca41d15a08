"""Turn approximate matrix-unit systems into exact ones nearby.

The pipeline is spectral: diagonal candidates become spectral projections,
get orthogonalized sequentially, and the off-diagonal units are rebuilt
from polar partial isometries of corner compressions.  Every step has a
checkable gap condition and fails loudly when the input is too corrupted.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, Tuple

import numpy as np

from .errors import EigenvalueNearThreshold, StabilizationFailed
from .linalg import hermitian_part, identity, op_norm, polar_partial_isometry, spectral_projection
from .units import MatrixUnitSystem, unit_defects

_EXACT_TOL = 1e-14  # inputs already satisfying a step's contract are kept bitwise


@dataclass(frozen=True)
class StabilizeParams:
    projection_threshold: float = 0.5
    isometry_cutoff: float = 0.5
    max_distance_report: bool = True

    def __post_init__(self):
        if not (0 < self.projection_threshold < 1 and 0 < self.isometry_cutoff < 1):
            raise StabilizationFailed("thresholds must lie in (0, 1)")


def _is_projection(q: np.ndarray) -> bool:
    return (
        op_norm(q - q.conj().T) <= _EXACT_TOL
        and op_norm(q @ q - q) <= _EXACT_TOL
    )


def stabilize_units(
    candidate: MatrixUnitSystem, params: StabilizeParams = StabilizeParams()
) -> Tuple[MatrixUnitSystem, float]:
    """Exact matrix units near an approximate system, plus the max distance.

    Steps that an input unit already satisfies to rounding precision keep
    the input matrix unchanged, making exact systems bit-stable fixed
    points.  Raises StabilizationFailed when a spectral gap or isometry
    rank condition fails, i.e. the input is beyond repair.
    """
    dim = candidate.ambient_dim
    shape = candidate.shape
    n_units = len(candidate.units)
    if n_units <= 128:
        defects = unit_defects(candidate)
        scored = max(
            defects.adjoint,
            defects.multiplication,
            defects.unitality if candidate.unital else 0.0,
        )
        if scored > 0.1:
            raise StabilizationFailed(
                f"candidate defects {defects.to_json()} exceed coarse admissibility 0.1"
            )
    else:
        # quadratic defect scan is skipped for large systems; the per-step
        # gap checks below still reject anything unusable
        for s, k in enumerate(shape, start=1):
            h = hermitian_part(candidate.unit(s, 1, 1))
            if op_norm(h @ h - h) > 0.1:
                raise StabilizationFailed("diagonal candidate too far from a projection")

    diag_keys = [(s, i) for s, k in enumerate(shape, start=1) for i in range(1, k + 1)]
    prev = np.zeros((dim, dim), dtype=np.complex128)
    diag: Dict[Tuple[int, int], np.ndarray] = {}
    try:
        for s, i in diag_keys:
            raw = candidate.unit(s, i, i)
            if _is_projection(raw) and op_norm(prev @ raw) <= _EXACT_TOL:
                q = raw
            else:
                h = hermitian_part(raw)
                q = spectral_projection(h, params.projection_threshold)
                comp = identity(dim) - prev
                q = spectral_projection(
                    hermitian_part(comp @ q @ comp), params.projection_threshold
                )
            diag[(s, i)] = q
            prev = prev + q
    except EigenvalueNearThreshold as exc:
        raise StabilizationFailed(f"spectral gap lost while orthogonalizing: {exc}") from exc

    if candidate.unital:
        deficiency = identity(dim) - prev
        if np.max(np.abs(deficiency)) > 0.0:
            s_last, i_last = diag_keys[-1]
            q_last = diag[(s_last, i_last)] + deficiency
            if op_norm(q_last @ q_last - q_last) > 1e-12:
                raise StabilizationFailed("unit deficiency cannot be absorbed as a projection")
            diag[(s_last, i_last)] = hermitian_part(q_last)

    isometries: Dict[Tuple[int, int], np.ndarray] = {}
    for s, k in enumerate(shape, start=1):
        q11 = diag[(s, 1)]
        isometries[(s, 1)] = q11
        for i in range(2, k + 1):
            qii = diag[(s, i)]
            raw = candidate.unit(s, i, 1)
            keeps = (
                op_norm(raw.conj().T @ raw - q11) <= _EXACT_TOL
                and op_norm(raw @ raw.conj().T - qii) <= _EXACT_TOL
                and op_norm(qii @ raw @ q11 - raw) <= _EXACT_TOL
            )
            if keeps:
                v = raw
            else:
                v = polar_partial_isometry(qii @ raw @ q11, params.isometry_cutoff)
                if op_norm(v.conj().T @ v - q11) > 1e-12 or op_norm(v @ v.conj().T - qii) > 1e-12:
                    raise StabilizationFailed(
                        f"block {s} row {i}: corner compression lost rank at the cutoff"
                    )
            isometries[(s, i)] = v

    units: Dict[Tuple[int, int, int], np.ndarray] = {}
    max_distance = 0.0
    for s, k in enumerate(shape, start=1):
        for i in range(1, k + 1):
            for j in range(1, k + 1):
                if i == j:
                    e = diag[(s, i)]
                elif j == 1:
                    e = isometries[(s, i)]
                elif i == 1:
                    e = isometries[(s, j)].conj().T
                else:
                    e = isometries[(s, i)] @ isometries[(s, j)].conj().T
                units[(s, i, j)] = e
                if params.max_distance_report:
                    max_distance = max(max_distance, op_norm(candidate.unit(s, i, j) - e))
    out = MatrixUnitSystem(
        shape=shape, ambient_dim=dim, units=units, unital=candidate.unital
    )
    return out, float(max_distance)


def perturb_units(units: MatrixUnitSystem, delta: float, seed: int) -> MatrixUnitSystem:
    """Seeded perturbation of operator norm <= delta on every unit.

    Diagonal units get Hermitian noise; off-diagonal partners are perturbed
    independently, so the adjoint-pairing defect stays within 2*delta.
    """
    if delta < 0:
        raise ValueError("delta must be nonnegative")
    rng = np.random.default_rng(seed)
    dim = units.ambient_dim
    out: Dict[Tuple[int, int, int], np.ndarray] = {}
    for (s, i, j) in units.keys():
        g = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
        if i == j:
            g = hermitian_part(g)
        g = g / max(op_norm(g), 1e-300)
        out[(s, i, j)] = units.unit(s, i, j) + delta * g
    return MatrixUnitSystem(
        shape=units.shape, ambient_dim=dim, units=out, unital=units.unital
    )
