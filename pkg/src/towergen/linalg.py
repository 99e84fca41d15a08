"""Dense complex matrix kernel.

Everything in the package works on square ``numpy`` arrays of complex128.
This module holds the norm, spectral, polar, tensor and direct-sum
primitives plus the JSON wire format for matrices.
"""

from __future__ import annotations

from typing import Iterable, Sequence

import numpy as np

from .errors import DimensionMismatch, DimensionOverflow, EigenvalueNearThreshold

DEFAULT_DIM_CAP = 4096

_HERMITIAN_TOL = 1e-12


def as_operator(entries) -> np.ndarray:
    """Validate and coerce to a square complex128 matrix."""
    a = np.asarray(entries, dtype=np.complex128)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise DimensionMismatch(f"expected a square matrix, got shape {a.shape}")
    return np.ascontiguousarray(a)


def adjoint(a: np.ndarray) -> np.ndarray:
    return a.conj().T


def hermitian_part(a: np.ndarray) -> np.ndarray:
    return (a + a.conj().T) / 2


def require_hermitian(a, tol: float = _HERMITIAN_TOL) -> np.ndarray:
    """Validate Hermitianity entrywise at construction time."""
    a = as_operator(a)
    defect = np.max(np.abs(a - a.conj().T)) if a.size else 0.0
    if defect > tol:
        raise DimensionMismatch(f"matrix is not Hermitian: entrywise defect {defect:.3e} > {tol:.1e}")
    return a


def identity(dim: int) -> np.ndarray:
    return np.eye(dim, dtype=np.complex128)


def op_norm(a: np.ndarray) -> float:
    """Largest singular value, via a Hermitian eigensolve of A*A.

    Deterministic; for Hermitian input this equals the spectral radius.
    """
    a = np.asarray(a, dtype=np.complex128)
    if a.size == 0:
        return 0.0
    if a.shape == (1, 1):
        return float(abs(a[0, 0]))
    w = np.linalg.eigvalsh(a.conj().T @ a)
    top = float(w[-1])
    return float(np.sqrt(top)) if top > 0.0 else 0.0


def tuple_norm(elems: Sequence[np.ndarray]) -> float:
    """Max of the operator norms across a tuple of same-dimension matrices."""
    mats = list(elems)
    if not mats:
        raise DimensionMismatch("operator tuple must be nonempty")
    dims = {m.shape for m in mats}
    if len(dims) != 1:
        raise DimensionMismatch(f"tuple entries have mixed shapes: {sorted(dims)}")
    return max(op_norm(m) for m in mats)


def spectral_projection(h: np.ndarray, threshold: float) -> np.ndarray:
    """Orthogonal projection onto the eigenspaces of ``h`` above ``threshold``.

    Requires a spectral gap: no eigenvalue may sit within 1e-8 of the
    threshold, otherwise the projection is numerically ill-defined and
    EigenvalueNearThreshold is raised.
    """
    h = require_hermitian(h, tol=1e-10)
    w, v = np.linalg.eigh(hermitian_part(h))
    if np.min(np.abs(w - threshold)) < 1e-8:
        raise EigenvalueNearThreshold(
            f"eigenvalue within 1e-8 of threshold {threshold}: spectrum {np.round(w, 12)}"
        )
    cols = v[:, w > threshold]
    p = cols @ cols.conj().T
    return hermitian_part(p)


def polar_partial_isometry(a: np.ndarray, cutoff: float) -> np.ndarray:
    """Partial isometry U·1[S>cutoff]·V* from the SVD A = U S V*.

    Singular directions at or below the cutoff are dropped; an input with
    no singular value above the cutoff maps to the zero matrix.
    """
    if cutoff <= 0:
        raise ValueError("cutoff must be positive")
    a = as_operator(a)
    u, s, vh = np.linalg.svd(a)
    keep = s > cutoff
    if not np.any(keep):
        return np.zeros_like(a)
    return u[:, keep] @ vh[keep, :]


def kron(a: np.ndarray, b: np.ndarray, dim_cap: int = DEFAULT_DIM_CAP) -> np.ndarray:
    a = as_operator(a)
    b = as_operator(b)
    out_dim = a.shape[0] * b.shape[0]
    if out_dim > dim_cap:
        raise DimensionOverflow(f"kron output dimension {out_dim} exceeds cap {dim_cap}")
    return np.kron(a, b)


def direct_sum(blocks: Iterable[np.ndarray], dim_cap: int = DEFAULT_DIM_CAP) -> np.ndarray:
    mats = [as_operator(b) for b in blocks]
    if not mats:
        raise DimensionMismatch("direct_sum needs at least one block")
    total = sum(m.shape[0] for m in mats)
    if total > dim_cap:
        raise DimensionOverflow(f"direct sum dimension {total} exceeds cap {dim_cap}")
    out = np.zeros((total, total), dtype=np.complex128)
    pos = 0
    for m in mats:
        d = m.shape[0]
        out[pos : pos + d, pos : pos + d] = m
        pos += d
    return out


def frobenius(a: np.ndarray) -> float:
    return float(np.linalg.norm(a))


def matrix_to_json(a: np.ndarray) -> dict:
    """Wire format: {dim, entries: row-major list of [re, im] pairs}."""
    a = as_operator(a)
    flat = a.reshape(-1)
    return {
        "dim": int(a.shape[0]),
        "entries": [[float(z.real), float(z.imag)] for z in flat],
    }


def matrix_from_json(obj: dict) -> np.ndarray:
    dim = int(obj["dim"])
    entries = obj["entries"]
    if len(entries) != dim * dim:
        raise DimensionMismatch(f"expected {dim * dim} entries, got {len(entries)}")
    flat = np.array([complex(re, im) for re, im in entries], dtype=np.complex128)
    return flat.reshape(dim, dim)
