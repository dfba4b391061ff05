"""Measures on the space of hyperplanes, assembled from base and direction measures.

Three representations are supported:

* ``PositionDirection`` -- pushforward of mu x omega under (a, v) |->
  {z : <z, v> = <a, v>}, the hyperplane through position a with normal v;
* ``OffsetDirection``   -- hyperplanes {z : <z, v> = p} weighted by
  d omega(v) * d offsets(p);
* ``SamplerMeasure``    -- an opaque seeded generator of weighted
  hyperplanes with a declared bounding region (Monte Carlo only).

``validate`` checks the three admissibility requirements statistically:
points carry no mass, sampled segments have positive mass, and compact
boxes have finite mass.  The report records "no violation found", never a
proof of validity.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .directions import DirectionMeasure
from .measures import BaseMeasure1D, BaseMeasureND


@dataclass(frozen=True)
class PositionDirection:
    """Pushforward of (position measure) x (direction measure) to hyperplanes."""

    mu: BaseMeasureND
    omega: DirectionMeasure

    def __post_init__(self):
        om_dim = self.omega.dim
        if self.mu.dim != om_dim:
            raise ValueError(f"position/direction dimension mismatch: {self.mu.dim} vs {om_dim}")

    @property
    def dim(self) -> int:
        return self.mu.dim

    def total_mass(self) -> float:
        return self.mu.total_mass() * self.omega.total_mass()

    def scaled(self, factor: float) -> "PositionDirection":
        return PositionDirection(self.mu.scaled(factor), self.omega)

    def translated(self, shift) -> "PositionDirection":
        return PositionDirection(self.mu.translated(shift), self.omega)


@dataclass(frozen=True)
class OffsetDirection:
    """Product measure in (normal direction, signed offset) coordinates."""

    omega: DirectionMeasure
    offsets: BaseMeasure1D

    @property
    def dim(self) -> int:
        return self.omega.dim

    def scaled(self, factor: float) -> "OffsetDirection":
        return OffsetDirection(self.omega, self.offsets.scaled(factor))

    def constant_offset_density(self):
        """(density, lo, hi) when the offset measure is one atom-free piece, else None."""
        if self.offsets.atom_positions.size or len(self.offsets.pieces) != 1:
            return None
        lo, hi, dens = self.offsets.pieces[0]
        return float(dens), float(lo), float(hi)


@dataclass(frozen=True)
class SamplerMeasure:
    """Opaque importance sampler of weighted hyperplanes.

    ``sample_fn(rng, size)`` must return (normals, offsets, weights) such
    that mean(w_i * g(H_i)) estimates the nu-integral of g.  A bounding box
    for the hyperplanes' relevance region must be declared.
    """

    dim: int
    sample_fn: Callable[[np.random.Generator, int], tuple]
    bounding_lo: np.ndarray
    bounding_hi: np.ndarray

    def __init__(self, dim, sample_fn, bounding_lo=None, bounding_hi=None):
        if bounding_lo is None or bounding_hi is None:
            raise ValueError("sampler measure requires a declared bounding region")
        lo = np.asarray(bounding_lo, dtype=float)
        hi = np.asarray(bounding_hi, dtype=float)
        lo.setflags(write=False)
        hi.setflags(write=False)
        object.__setattr__(self, "dim", int(dim))
        object.__setattr__(self, "sample_fn", sample_fn)
        object.__setattr__(self, "bounding_lo", lo)
        object.__setattr__(self, "bounding_hi", hi)


HyperplaneMeasure = PositionDirection | OffsetDirection | SamplerMeasure


@dataclass(frozen=True)
class ValidationReport:
    """Statistical admissibility check results; absence of evidence only."""

    point_masses: tuple          # (point, mass, flagged) triples
    min_segment_mass: float
    min_segment_witness: tuple   # (x, y)
    region_mass: float
    ok: bool
    notes: str

    def violations(self) -> list[str]:
        out = []
        for pt, mass, flagged in self.point_masses:
            if flagged:
                out.append(f"point {np.asarray(pt).tolist()} carries hyperplane mass {mass:g}")
        if not self.min_segment_mass > 0.0:
            out.append(f"segment {self.min_segment_witness} has zero mass")
        if not math.isfinite(self.region_mass):
            out.append("region mass is not finite")
        return out


def validate(nu: HyperplaneMeasure, region_lo, region_hi, *, point_count: int = 32,
             segment_count: int = 64, seed: int = 0, backend=None) -> ValidationReport:
    """Check the admissibility bullets on sampled points/segments in a box region."""
    from . import evaluate  # deferred: evaluators consume these measure types

    lo = np.asarray(region_lo, dtype=float)
    hi = np.asarray(region_hi, dtype=float)
    if np.any(hi <= lo):
        raise ValueError("validation region must be a nonempty box")
    rng = np.random.default_rng(seed)
    if backend is None:
        backend = evaluate.default_backend(nu, budget=20000, seed=seed)

    pts = lo + rng.random((point_count, lo.size)) * (hi - lo)
    probe_pts = [p for p in pts]
    if isinstance(nu, PositionDirection) and nu.mu.atom_points.size:
        inside = np.all((nu.mu.atom_points >= lo) & (nu.mu.atom_points <= hi), axis=1)
        probe_pts.extend(p for p in nu.mu.atom_points[inside])
    point_masses = []
    for p in probe_pts:
        mass = _point_mass(nu, p, rng)
        point_masses.append((tuple(p.tolist()), mass, mass > 0.0))

    min_mass = math.inf
    witness = None
    for _ in range(segment_count):
        a = lo + rng.random(lo.size) * (hi - lo)
        b = lo + rng.random(lo.size) * (hi - lo)
        if np.all(a == b):
            continue
        mass = evaluate.seg_mass(nu, a, b, backend=backend)
        if mass < min_mass:
            min_mass, witness = mass, (tuple(a.tolist()), tuple(b.tolist()))

    region_mass = evaluate.box_mass(nu, lo, hi, backend=backend)
    ok = all(not f for _, _, f in point_masses) and min_mass > 0.0 and math.isfinite(region_mass)
    return ValidationReport(
        point_masses=tuple(point_masses),
        min_segment_mass=float(min_mass),
        min_segment_witness=witness,
        region_mass=float(region_mass),
        ok=ok,
        notes="statistical detection on finite samples; 'ok' means no violation found",
    )


def _point_mass(nu: HyperplaneMeasure, p: np.ndarray, rng: np.random.Generator) -> float:
    """nu(pi{p}): hyperplane mass through a single point."""
    if isinstance(nu, PositionDirection):
        # direction variants are absolutely continuous, so only a position
        # atom sitting exactly at p produces mass through p
        idx = nu.mu.atoms_near(p)
        if idx.size:
            return float(np.sum(nu.mu.atom_weights[idx])) * nu.omega.total_mass()
        return 0.0
    if isinstance(nu, OffsetDirection):
        # an offset atom spreads over a sphere-null set of directions per point
        return 0.0
    normals, offsets, weights = nu.sample_fn(rng, 4096)
    gaps = normals @ p - offsets
    return float(np.mean(weights * (gaps == 0.0)))
