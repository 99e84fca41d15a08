"""Finite-size matrix machinery: polynomial norms, Haar sampling,
packing and covering estimates, and block-compression counting.

Covering numbers of continuous sets cannot be computed by sampling, so the
report vocabulary is rigid: packings certify lower bounds (at half the
separation radius), greedy covers of a sampled cloud are upper estimates
for the cloud only.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from math import e, pi
from typing import List, Sequence, Tuple, Union

import numpy as np

from .errors import DimensionMismatch, IndexOutOfRange
from .linalg import hermitian_part, identity, op_norm, tuple_norm
from .units import MatrixUnitSystem, UnitalEmbedding, normalize_shape, rank, subrank

Point = Union[np.ndarray, Sequence[np.ndarray]]


@dataclass(frozen=True)
class NcPolynomial:
    """Noncommutative polynomial with exact rational complex coefficients.

    Terms are (re: Fraction, im: Fraction, word) with 1-based indeterminate
    indices; the empty word is the unit term.
    """

    terms: Tuple[Tuple[Fraction, Fraction, Tuple[int, ...]], ...]

    @staticmethod
    def from_pairs(pairs) -> "NcPolynomial":
        terms = []
        for coeff, word in pairs:
            if isinstance(coeff, tuple):
                re, im = coeff
            else:
                re, im = Fraction(coeff).limit_denominator(10**12), Fraction(0)
            terms.append((Fraction(re), Fraction(im), tuple(int(w) for w in word)))
        return NcPolynomial(terms=tuple(terms))

    def to_json(self) -> list:
        return [
            {
                "coeff": [t[0].numerator, t[0].denominator, t[1].numerator, t[1].denominator],
                "word": list(t[2]),
            }
            for t in self.terms
        ]

    @staticmethod
    def from_json(obj) -> "NcPolynomial":
        terms = []
        for item in obj:
            n_re, d_re, n_im, d_im = item["coeff"]
            terms.append(
                (Fraction(n_re, d_re), Fraction(n_im, d_im), tuple(int(w) for w in item["word"]))
            )
        return NcPolynomial(terms=tuple(terms))


def eval_poly(p: NcPolynomial, elems: Sequence[np.ndarray]) -> np.ndarray:
    """Coefficient-weighted sum of word products; empty word gives the identity."""
    mats = list(elems)
    if not mats:
        raise DimensionMismatch("need at least one tuple element")
    dim = mats[0].shape[0]
    out = np.zeros((dim, dim), dtype=np.complex128)
    for re, im, word in p.terms:
        coeff = complex(float(re), float(im))
        acc = identity(dim)
        for idx in word:
            if not (1 <= idx <= len(mats)):
                raise IndexOutOfRange(f"indeterminate {idx} beyond tuple length {len(mats)}")
            acc = acc @ mats[idx - 1]
        out += coeff * acc
    return out


@dataclass
class MicrostateSpec:
    num_indeterminates: int
    matrix_size: int
    epsilon: float
    polynomials: List[NcPolynomial]
    target_norms: List[float]

    def __post_init__(self):
        if self.epsilon <= 0:
            raise DimensionMismatch("epsilon must be positive")
        if len(self.polynomials) != len(self.target_norms):
            raise DimensionMismatch("one target norm per polynomial")


def gamma_member(elems: Sequence[np.ndarray], spec: MicrostateSpec) -> Tuple[bool, List[float]]:
    """Check the per-polynomial norm gaps against the tolerance."""
    mats = list(elems)
    if len(mats) != spec.num_indeterminates:
        raise DimensionMismatch("tuple length does not match the spec")
    for m in mats:
        if m.shape[0] != spec.matrix_size:
            raise DimensionMismatch("matrix size does not match the spec")
    gaps = [
        abs(op_norm(eval_poly(p, mats)) - t)
        for p, t in zip(spec.polynomials, spec.target_norms)
    ]
    return all(g < spec.epsilon for g in gaps), gaps


def haar_unitary(k: int, seed: int) -> np.ndarray:
    """Haar-distributed unitary via QR of a complex Gaussian with phase fix."""
    if k < 1:
        raise DimensionMismatch("dimension must be positive")
    rng = np.random.default_rng(seed)
    z = (rng.standard_normal((k, k)) + 1j * rng.standard_normal((k, k))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    d = np.diag(r)
    return q * (d / np.abs(d))


def orbit_cloud(a: np.ndarray, count: int, seed: int) -> List[np.ndarray]:
    """Unitary conjugates W*AW for independent Haar samples."""
    if count < 1:
        raise DimensionMismatch("need at least one sample")
    seeds = np.random.SeedSequence(seed).spawn(count)
    out = []
    for s in seeds:
        w = haar_unitary(a.shape[0], seed=int(s.generate_state(1)[0]))
        out.append(w.conj().T @ a @ w)
    return out


def _as_tuple(point: Point) -> List[np.ndarray]:
    if isinstance(point, np.ndarray):
        return [point]
    return list(point)


def point_distance(x: Point, y: Point) -> float:
    xs, ys = _as_tuple(x), _as_tuple(y)
    if len(xs) != len(ys):
        raise DimensionMismatch("tuple lengths differ")
    return tuple_norm([a - b for a, b in zip(xs, ys)])


@dataclass
class CoveringEstimate:
    omega: float
    sample_count: int
    packing_count: int
    implied_cover_lower: int  # valid for balls of radius omega/2
    greedy_cover_count: int

    def to_json(self) -> dict:
        return {
            "omega": self.omega,
            "sample_count": self.sample_count,
            "packing_count": self.packing_count,
            "implied_cover_lower": self.implied_cover_lower,
            "greedy_cover_count": self.greedy_cover_count,
        }


def greedy_packing(cloud: Sequence[Point], omega: float) -> CoveringEstimate:
    """Scan-order maximal omega-separated subset of the cloud.

    Points at distance exactly omega are kept (closed separation), which
    maximizes the certified lower bound: balls of radius omega/2 contain at
    most one kept point, so any cover at that radius needs packing_count
    balls.
    """
    if omega <= 0:
        raise DimensionMismatch("omega must be positive")
    points = list(cloud)
    if not points:
        raise DimensionMismatch("cloud must be nonempty")
    kept: List[Point] = []
    for p in points:
        if all(point_distance(p, q) >= omega for q in kept):
            kept.append(p)
    return CoveringEstimate(
        omega=float(omega),
        sample_count=len(points),
        packing_count=len(kept),
        implied_cover_lower=len(kept),
        greedy_cover_count=greedy_cover(points, omega),
    )


def greedy_cover(cloud: Sequence[Point], omega: float) -> int:
    """Greedy open-ball cover count: an upper estimate for the cloud itself."""
    if omega <= 0:
        raise DimensionMismatch("omega must be positive")
    points = list(cloud)
    covered = [False] * len(points)
    balls = 0
    for i, p in enumerate(points):
        if covered[i]:
            continue
        balls += 1
        for j in range(i, len(points)):
            if not covered[j] and point_distance(p, points[j]) < omega:
                covered[j] = True
    return balls


@dataclass
class UnitaryBoundReport:
    k: int
    radius: float
    certified_lower: int
    paper_lower: float
    paper_upper: float
    upper_violated: bool
    lower_status: str

    def to_json(self) -> dict:
        return {
            "k": self.k,
            "radius": self.radius,
            "certified_lower": self.certified_lower,
            "paper_lower": self.paper_lower,
            "paper_upper": self.paper_upper,
            "upper_violated": self.upper_violated,
            "lower_status": self.lower_status,
        }


def check_unitary_bounds(k: int, radius: float, estimate: CoveringEstimate) -> UnitaryBoundReport:
    """Compare a packing-certified lower bound with the unitary-group bounds.

    The estimate's packing at separation 2*radius certifies a covering
    lower bound at ``radius``.  Sampling can contradict the upper bound
    (that would mean a bug) but can only be consistent or inconclusive
    about the lower one.
    """
    if abs(estimate.omega - 2 * radius) > 1e-12:
        raise DimensionMismatch(
            f"estimate separation {estimate.omega} does not certify radius {radius}"
        )
    lower_ref = (1.0 / radius) ** (k * k)
    upper_ref = (9.0 * pi * e / radius) ** (k * k)
    certified = estimate.implied_cover_lower
    return UnitaryBoundReport(
        k=k,
        radius=radius,
        certified_lower=certified,
        paper_lower=lower_ref,
        paper_upper=upper_ref,
        upper_violated=certified > upper_ref,
        lower_status="consistent" if certified >= lower_ref else "inconclusive",
    )


@dataclass
class CompressionCheck:
    dim: int
    cap_value: float
    subrank_at_least: bool
    bound_holds: bool

    def to_json(self) -> dict:
        return {
            "dim": self.dim,
            "cap_value": self.cap_value,
            "subrank_at_least": self.subrank_at_least,
            "bound_holds": self.bound_holds,
        }


def compression_dimension(
    shape: Sequence[int], embedding: UnitalEmbedding, big_n: int
) -> CompressionCheck:
    """Real dimension sum c_s^2 k_s of the pinched Hermitian space.

    When every block size is at least N the dimension is capped by k^2/N;
    both sides are evaluated and reported.
    """
    shape = normalize_shape(shape)
    if embedding.shape != shape:
        raise DimensionMismatch("embedding does not match shape")
    if big_n < 1:
        raise DimensionMismatch("N must be positive")
    dim = sum(c * c * k for c, k in zip(embedding.multiplicities, shape))
    k_total = embedding.target_dim
    cap = k_total * k_total / big_n
    applies = subrank(shape) >= big_n
    holds = (not applies) or dim <= cap + 1e-12
    return CompressionCheck(
        dim=int(dim), cap_value=float(cap), subrank_at_least=applies, bound_holds=holds
    )


def enumerate_multiplicities(k: int, shape: Sequence[int]) -> Tuple[List[Tuple[int, ...]], dict]:
    """All positive multiplicity tuples embedding the shape unitally in M_k."""
    shape = normalize_shape(shape)
    if k < sum(shape):
        raise DimensionMismatch(f"target {k} below the minimal embedding {sum(shape)}")
    found: List[Tuple[int, ...]] = []

    def walk(idx: int, remaining: int, partial: Tuple[int, ...]):
        if idx == len(shape):
            if remaining == 0:
                found.append(partial)
            return
        k_s = shape[idx]
        tail_min = sum(shape[idx + 1 :])
        c = 1
        while c * k_s + tail_min <= remaining:
            walk(idx + 1, remaining - c * k_s, partial + (c,))
            c += 1

    walk(0, k, ())
    cap = (k / subrank(shape)) ** len(shape)
    report = {
        "count": len(found),
        "cardinality_cap": float(cap),
        "cap_respected": len(found) <= cap + 1e-9,
    }
    return found, report


def build_test_element(shape: Sequence[int], units: MatrixUnitSystem) -> np.ndarray:
    """Staircase element with eigenvalues 1..rank along the diagonal units."""
    shape = normalize_shape(shape)
    if units.shape != shape:
        raise DimensionMismatch("unit system does not match shape")
    out = np.zeros((units.ambient_dim, units.ambient_dim), dtype=np.complex128)
    offset = 0
    for s, k_s in enumerate(shape, start=1):
        for i in range(1, k_s + 1):
            out += (i + offset) * units.unit(s, i, i)
        offset += k_s
    return hermitian_part(out)


def pinching_defect(elems: Sequence[np.ndarray], units: MatrixUnitSystem) -> List[float]:
    """Per-element distance to its own diagonal-block pinching.

    For a tuple within omega of block-diagonal form the defect is at most
    2*omega: the pinching is a contraction and fixes the block part.
    """
    diags = [units.unit(s, i, i) for s, k in enumerate(units.shape, start=1) for i in range(1, k + 1)]
    out = []
    for x in elems:
        pinched = np.zeros_like(x)
        for p in diags:
            pinched += p @ x @ p
        out.append(float(op_norm(x - pinched)))
    return out
