"""Named measure families and a controlled degenerate family, plus grid export.

Builders return a ``Scenario``: the measure, a bounded domain, a basepoint
and the declared expectations.  The doubling-box family extends the base
measure far beyond the query window (factor >= 100) because global doubling
cannot hold for compactly supported measures; the window-local doubling
ratio is the desk-scale proxy for the doubling hypothesis.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import evaluate
from .directions import (ArcDensity2D, SymmetricCap, UniformDirections, abs_moment,
                         wrap_interval)
from .hyperplane_measures import HyperplaneMeasure, OffsetDirection, PositionDirection, validate
from .measures import BaseMeasure1D, BaseMeasureND, doubling_ratio, tail1_check

PI = math.pi


@dataclass(frozen=True)
class Scenario:
    """A measure with its domain, basepoint and declared expectations."""

    name: str
    dim: int
    domain_lo: np.ndarray
    domain_hi: np.ndarray
    measure: HyperplaneMeasure
    basepoint: np.ndarray
    expected: dict = field(default_factory=dict)

    def __post_init__(self):
        lo = np.asarray(self.domain_lo, dtype=float)
        hi = np.asarray(self.domain_hi, dtype=float)
        o = np.asarray(self.basepoint, dtype=float)
        if np.any(hi <= lo):
            raise ValueError("scenario domain must be a nonempty box")
        if np.any(o < lo) or np.any(o > hi):
            raise ValueError("basepoint must lie inside the domain")
        for arr in (lo, hi, o):
            arr.setflags(write=False)
        object.__setattr__(self, "domain_lo", lo)
        object.__setattr__(self, "domain_hi", hi)
        object.__setattr__(self, "basepoint", o)

    def backend(self, *, budget: int = 100_000, seed: int = 0):
        return evaluate.default_backend(self.measure, budget=budget, seed=seed)

    def embedding(self, *, backend=None) -> evaluate.EmbeddingMap:
        return evaluate.EmbeddingMap(self.measure, self.basepoint,
                                     backend=backend or self.backend())

    def validate(self, *, seed: int = 0, point_count: int = 32, segment_count: int = 64):
        return validate(self.measure, self.domain_lo, self.domain_hi,
                        point_count=point_count, segment_count=segment_count, seed=seed)


# ---------------------------------------------------------------------------
# builders
# ---------------------------------------------------------------------------

def crofton(n: int, *, half_extent: float = 5.0) -> Scenario:
    """Rotation- and translation-invariant measure recovering the Euclidean metric.

    Uniform directions with a unit offset density wide enough to cover the
    domain; the metric is (2/pi)|x - y| for n = 2 and the embedding is
    (x - o)/n.
    """
    if n < 2:
        raise ValueError("dimension must be >= 2")
    span = 2.0 * half_extent * math.sqrt(n)
    nu = OffsetDirection(UniformDirections(n), BaseMeasure1D.lebesgue(-span, span, 1.0))
    lo = -half_extent * np.ones(n)
    return Scenario(
        name=f"crofton{n}",
        dim=n,
        domain_lo=lo,
        domain_hi=-lo,
        measure=nu,
        basepoint=np.zeros(n),
        expected={
            "transverse": True,
            "kappa": (1.0 / n) / abs_moment(n),
            "metric_per_length": abs_moment(n),
            "embedding_scale": 1.0 / n,
        },
    )


def lebesgue_box_measure(dim: int, *, inner_half: float, levels: int = 6,
                         cell: float | None = None, gauss_order: int = 4,
                         density: float = 1.0) -> BaseMeasureND:
    """Unit-density box graded from fine cells near the origin to a far boundary.

    The box covers [-inner_half * 2**levels, ...]^dim; each dyadic ring
    doubles the cell size, so far mass is represented coarsely and the
    window-scale mass finely.
    """
    cell = cell if cell is not None else inner_half / 4.0
    m = round(inner_half / cell)
    if m < 1 or abs(m * cell - inner_half) > 1e-12 * inner_half:
        raise ValueError("inner_half must be an integer multiple of the cell size")
    cells = []

    def add_grid(h: float, size: float, skip_half: float | None):
        counts = round(2.0 * h / size)
        for idx in np.ndindex(*([counts] * dim)):
            lo = -h + size * np.asarray(idx, dtype=float)
            hi = lo + size
            if skip_half is not None and np.all(np.abs(lo) <= skip_half) \
                    and np.all(np.abs(hi) <= skip_half):
                continue
            cells.append(np.concatenate([lo, hi, [density]]))

    add_grid(inner_half, cell, None)
    h, size = inner_half, cell
    for _ in range(levels):
        h, size = 2.0 * h, 2.0 * size
        add_grid(h, size, skip_half=0.5 * h)
    return BaseMeasureND(dim, cells=cells, gauss_order=gauss_order)


def doubling_pushforward(mu: BaseMeasureND, *, window_lo, window_hi,
                         name: str = "doubling_pushforward", seed: int = 0,
                         basepoint=None) -> Scenario:
    """Pushforward of a doubling-type base measure with uniform directions.

    Requires a finite positive inverse-distance integral and a support of
    affine rank >= 2 (a collinear support fails the segment-positivity
    bullet).  The scenario is marked transverse when the window-local
    doubling ratio is finite.
    """
    t1 = tail1_check(mu)
    if not (0.0 < t1 < math.inf):
        raise ValueError(f"inverse-distance integral {t1:g} must be finite and positive")
    if mu.affine_rank() < 2:
        raise ValueError("support of the base measure is contained in a line")
    lo = np.asarray(window_lo, dtype=float)
    hi = np.asarray(window_hi, dtype=float)
    try:
        ratio = doubling_ratio(mu, lo, hi, seed=seed)
        transverse = math.isfinite(ratio)
    except evaluate.DegenerateConfigurationError:
        # no mass meets the sampled window: the doubling proxy says nothing
        ratio = None
        transverse = None
    nu = PositionDirection(mu, UniformDirections(mu.dim))
    o = np.asarray(basepoint, dtype=float) if basepoint is not None else 0.5 * (lo + hi)
    return Scenario(
        name=name,
        dim=mu.dim,
        domain_lo=lo,
        domain_hi=hi,
        measure=nu,
        basepoint=o,
        expected={"transverse": transverse, "doubling_ratio": ratio, "tail1": t1},
    )


def beurling_ahlfors(mu1d: BaseMeasure1D, *, cap_half_angle: float = PI / 6.0,
                     window_half: float | None = None, height: float = 2.0,
                     name: str = "beurling_ahlfors") -> Scenario:
    """Extension-type family: a line measure with steeply crossing hyperplanes.

    The direction cap is centered on the axis direction of the real line, so
    every hyperplane in the support crosses it at angle >= pi/2 -
    cap_half_angle; with the unnormalized arclength weighting the cap's
    oriented-normal integral along the axis is exactly 1, making the
    embedding restricted to the axis reproduce the measure's interval
    masses.  Atoms inside the query window are rejected: each would carry
    positive hyperplane mass through a single point.
    """
    if not 0.0 < cap_half_angle <= 0.5 * PI:
        raise ValueError("cap half angle must lie in (0, pi/2]")
    s_lo, s_hi = mu1d.support_bounds()
    if window_half is None:
        window_half = 0.1 * max(abs(s_lo), abs(s_hi))
    if mu1d.atoms_in(-window_half, window_half).size:
        raise ValueError("base measure has atoms inside the query window")
    mu = BaseMeasureND.from_axis_measure(mu1d, dim=2, axis=0)
    cap = SymmetricCap((1.0, 0.0), cap_half_angle)
    # arclength weighting: the axis-direction normal integral over the cap
    # is 2 sin(cap_half_angle), equal to 1 at the pi/6 default
    nu = PositionDirection(mu, cap)
    # near-vertical lines only sweep the cone over the support; keeping the
    # domain above the support keeps every segment's mass positive
    x_lo = max(-window_half, s_lo)
    x_hi = min(window_half, s_hi)
    if x_hi <= x_lo:
        raise ValueError("query window lies outside the base measure's support")
    lo = np.array([x_lo, -height])
    hi = np.array([x_hi, height])
    return Scenario(
        name=name,
        dim=2,
        domain_lo=lo,
        domain_hi=hi,
        measure=nu,
        basepoint=np.array([0.5 * (x_lo + x_hi), 0.0]),
        expected={"transverse": True, "axis_cdf_scale": 2.0 * math.sin(cap_half_angle),
                  "min_crossing_angle": 0.5 * PI - cap_half_angle},
    )


def inv_sqrt_density(*, pieces: int = 1024, support: float = 1.0) -> BaseMeasure1D:
    """Staircase approximation of the density |x|^(-1/2) on (0, support]."""
    edges = np.linspace(0.0, support, pieces + 1)
    rows = []
    for lo, hi in zip(edges[:-1], edges[1:]):
        # exact average of the density over the piece keeps interval masses honest
        dens = 2.0 * (math.sqrt(hi) - math.sqrt(lo)) / (hi - lo)
        rows.append((lo, hi, dens))
    return BaseMeasure1D(pieces=rows)


def degenerate_caps(theta0: float, *, window_half: float = 0.4, levels: int = 6,
                    name: str | None = None) -> Scenario:
    """Two symmetric direction caps on perpendicular axes over a wide flat box.

    A single cap concentrates all hyperplanes near one direction family;
    two perpendicular caps keep the measure admissible for every theta0 > 0
    while the transversality ratio on oblique segments decays as theta0
    shrinks (toward the two-direction limit), exhibiting the necessity side
    of the transversality hypothesis.
    """
    if not 0.0 < theta0 <= 0.5 * PI:
        raise ValueError("cap half angle must lie in (0, pi/2]")
    pieces = []
    for center in (0.0, 0.5 * PI):
        pieces.extend((lo, hi, 1.0) for lo, hi in wrap_interval(center - theta0, 2.0 * theta0))
    omega = ArcDensity2D(pieces)
    mu = lebesgue_box_measure(2, inner_half=2.0 * window_half, levels=levels)
    nu = PositionDirection(mu, omega)
    lo = -window_half * np.ones(2)
    return Scenario(
        name=name or f"degenerate_caps_{theta0:g}",
        dim=2,
        domain_lo=lo,
        domain_hi=-lo,
        measure=nu,
        basepoint=np.zeros(2),
        expected={"transverse": True, "theta0": theta0,
                  "kappa_upper_oblique": math.sin(0.25 * PI + theta0)},
    )


# ---------------------------------------------------------------------------
# grid export
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class GridImage:
    """Lattice sample of the embedding map with its metadata."""

    dim: int
    resolution: int
    window_lo: np.ndarray
    window_hi: np.ndarray
    points: np.ndarray
    values: np.ndarray

    def to_csv(self, path) -> None:
        n = self.dim
        with open(path, "w", encoding="utf-8") as fh:
            meta = [str(n), str(self.resolution)]
            meta += [f"{v:.17g}" for v in self.window_lo]
            meta += [f"{v:.17g}" for v in self.window_hi]
            fh.write(",".join(meta) + "\n")
            idx = np.stack(np.meshgrid(*([np.arange(self.resolution)] * n),
                                       indexing="ij"), axis=-1).reshape(-1, n)
            for k in range(len(self.points)):
                row = [str(int(v)) for v in idx[k]]
                row += [f"{v:.17g}" for v in self.points[k]]
                row += [f"{v:.17g}" for v in self.values[k]]
                fh.write(",".join(row) + "\n")

    @classmethod
    def from_csv(cls, path) -> "GridImage":
        with open(path, "r", encoding="utf-8") as fh:
            header = fh.readline().strip().split(",")
            n = int(header[0])
            resolution = int(header[1])
            window_lo = np.array([float(v) for v in header[2:2 + n]])
            window_hi = np.array([float(v) for v in header[2 + n:2 + 2 * n]])
            pts, vals = [], []
            for line in fh:
                cells = line.strip().split(",")
                pts.append([float(v) for v in cells[n:2 * n]])
                vals.append([float(v) for v in cells[2 * n:3 * n]])
        return cls(n, resolution, window_lo, window_hi,
                   np.asarray(pts), np.asarray(vals))


def grid_export(scenario: Scenario, resolution: int, window_lo, window_hi, *,
                backend=None) -> GridImage:
    """Evaluate the embedding on a lattice; any degenerate or non-finite node fails."""
    lo = np.asarray(window_lo, dtype=float)
    hi = np.asarray(window_hi, dtype=float)
    if np.any(lo < scenario.domain_lo) or np.any(hi > scenario.domain_hi):
        raise ValueError("export window must lie inside the scenario domain")
    if resolution < 2:
        raise ValueError("resolution must be at least 2")
    f = scenario.embedding(backend=backend)
    axes = [np.linspace(lo[k], hi[k], resolution) for k in range(scenario.dim)]
    grid = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, scenario.dim)
    values = f.eval_many(grid)
    if not np.all(np.isfinite(values)):
        raise ValueError("embedding produced a non-finite value on the grid")
    return GridImage(scenario.dim, resolution, lo, hi, grid, values)
