"""Estimators and audits for transversality, monotonicity and bi-Lipschitz bounds.

All estimators report empirical extrema over seeded samples together with
the witness achieving them; they never claim certified global bounds.  One
sampling plan drives every audit, and the segment pool is shared between
the transversality ratio, the angle-threshold profile, the monotonicity
ratio and the bi-Lipschitz ratios, so the chain inequalities relating them
are checked on identical data.

Segments are sampled jointly over positions, directions and log-spaced
lengths: the transversality and quasisymmetry statements are multi-scale,
so short segments must be represented explicitly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import evaluate
from .geometry import Cube, cube_vertices

TAU_GRID = np.round(np.arange(1, 101) * 0.01, 2)
ETA_BUCKET_EDGES = np.logspace(-2.0, 2.0, 33)
CHAIN_SLACK = 1e-10
PAIR_SLACK = 1e-12
LIP_SLACK = 1e-12
IDENTITY_REL = 1e-8


@dataclass(frozen=True)
class SamplingPlan:
    """Region, sample counts, length scales and the seed driving all audits."""

    region_lo: tuple
    region_hi: tuple
    pair_count: int = 256
    cycle_count: int = 128
    cube_count: int = 64
    triple_count: int = 256
    scale_range: tuple = (0.05, 0.5)
    seed: int = 0

    def __post_init__(self):
        lo = np.asarray(self.region_lo, dtype=float)
        hi = np.asarray(self.region_hi, dtype=float)
        if lo.shape != hi.shape or np.any(hi <= lo):
            raise ValueError("plan region must be a nonempty box")
        if not 0.0 < self.scale_range[0] <= self.scale_range[1]:
            raise ValueError("scale range must be positive and ordered")
        object.__setattr__(self, "region_lo", tuple(float(v) for v in lo))
        object.__setattr__(self, "region_hi", tuple(float(v) for v in hi))

    @property
    def dim(self) -> int:
        return len(self.region_lo)

    def to_dict(self) -> dict:
        return {
            "region_lo": list(self.region_lo),
            "region_hi": list(self.region_hi),
            "pair_count": self.pair_count,
            "cycle_count": self.cycle_count,
            "cube_count": self.cube_count,
            "triple_count": self.triple_count,
            "scale_range": list(self.scale_range),
            "seed": self.seed,
        }


def _streams(plan: SamplingPlan, count: int = 5):
    return [np.random.default_rng(s) for s in np.random.SeedSequence(plan.seed).spawn(count)]


SCALE_STRATA = 8


def _sample_segments(plan: SamplingPlan, rng: np.random.Generator):
    """Segments with uniform positions/directions and scale-stratified lengths.

    Transversality and quasisymmetry are multi-scale statements, so the
    log-length axis is stratified to guarantee short segments appear in
    every pool rather than only in expectation.
    """
    lo = np.asarray(plan.region_lo)
    hi = np.asarray(plan.region_hi)
    n = lo.size
    centers = lo + rng.random((plan.pair_count, n)) * (hi - lo)
    dirs = rng.standard_normal((plan.pair_count, n))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    lmin, lmax = plan.scale_range
    strata = np.arange(plan.pair_count) % SCALE_STRATA
    u = (strata + rng.random(plan.pair_count)) / SCALE_STRATA
    lengths = np.exp(math.log(lmin) + u * (math.log(lmax) - math.log(lmin)))
    # shrink each segment so both endpoints stay inside the region
    with np.errstate(divide="ignore"):
        room = np.minimum((hi - centers) / np.abs(dirs), (centers - lo) / np.abs(dirs))
    room = np.where(np.isfinite(room), room, np.inf).min(axis=1)
    half = np.minimum(0.5 * lengths, 0.999 * room)
    half = np.maximum(half, 1e-9)
    return centers - half[:, None] * dirs, centers + half[:, None] * dirs


def _sample_points(plan, rng, count):
    lo = np.asarray(plan.region_lo)
    hi = np.asarray(plan.region_hi)
    return lo + rng.random((count, lo.size)) * (hi - lo)


def _sample_cubes(plan: SamplingPlan, rng: np.random.Generator):
    lo = np.asarray(plan.region_lo)
    hi = np.asarray(plan.region_hi)
    lmin, lmax = plan.scale_range
    cubes = []
    for _ in range(plan.cube_count):
        edge = math.exp(rng.uniform(math.log(lmin), math.log(lmax)))
        edge = min(edge, 0.9 * float(np.min(hi - lo)))
        c_lo = lo + 0.5 * edge
        c_hi = hi - 0.5 * edge
        center = c_lo + rng.random(lo.size) * (c_hi - c_lo)
        cubes.append(Cube(center, edge))
    return cubes


# ---------------------------------------------------------------------------
# the shared per-segment sweep
# ---------------------------------------------------------------------------

@dataclass
class _SegmentSweep:
    xs: np.ndarray
    ys: np.ndarray
    mass: np.ndarray
    trans: np.ndarray
    emb: np.ndarray
    angle: np.ndarray  # (pairs, len(TAU_GRID))

    @property
    def emb_norm(self) -> np.ndarray:
        return np.linalg.norm(self.emb, axis=1)

    @property
    def seg_len(self) -> np.ndarray:
        return np.linalg.norm(self.xs - self.ys, axis=1)


def _segment_sweep(nu, plan: SamplingPlan, backend) -> _SegmentSweep:
    rng = _streams(plan)[0]
    xs, ys = _sample_segments(plan, rng)
    mass = np.empty(len(xs))
    trans = np.empty(len(xs))
    emb = np.empty((len(xs), plan.dim))
    angle = np.empty((len(xs), len(TAU_GRID)))
    for i, (x, y) in enumerate(zip(xs, ys)):
        p = backend.pair(nu, x, y, taus=TAU_GRID)
        mass[i], trans[i], emb[i], angle[i] = p.mass, p.transversal, p.embed, p.angle
    return _SegmentSweep(xs, ys, mass, trans, emb, angle)


def _witness_pair(sweep: _SegmentSweep, i: int) -> dict:
    return {
        "x": sweep.xs[i].tolist(),
        "y": sweep.ys[i].tolist(),
        "mass": float(sweep.mass[i]),
        "transversal": float(sweep.trans[i]),
        "embed_gap": float(sweep.emb_norm[i]),
    }


# ---------------------------------------------------------------------------
# individual estimators (each reproduces the shared pool from the plan seed)
# ---------------------------------------------------------------------------

def kappa_hat(nu, plan: SamplingPlan, *, backend=None):
    """Worst sampled ratio (sin-alpha integral) / (segment mass), with witness."""
    backend = backend or evaluate.default_backend(nu, seed=plan.seed)
    sweep = _segment_sweep(nu, plan, backend)
    if np.any(sweep.mass <= 0.0):
        i = int(np.argmin(sweep.mass))
        raise evaluate.DegenerateConfigurationError(
            f"sampled segment carries no hyperplane mass: {_witness_pair(sweep, i)}")
    ratios = sweep.trans / sweep.mass
    i = int(np.argmin(ratios))
    return float(ratios[i]), _witness_pair(sweep, i)


def tau_hat(nu, plan: SamplingPlan, *, backend=None) -> float:
    """Largest grid threshold passing the angle-concentration test on all segments."""
    backend = backend or evaluate.default_backend(nu, seed=plan.seed)
    sweep = _segment_sweep(nu, plan, backend)
    return _tau_from_sweep(sweep)[0]


def _tau_from_sweep(sweep: _SegmentSweep):
    ok = np.all(sweep.angle >= TAU_GRID[None, :] * sweep.mass[:, None], axis=0)
    idx = np.nonzero(ok)[0]
    tau = float(TAU_GRID[idx[-1]]) if idx.size else 0.0
    # witness: the segment blocking the next grid step (absent when saturated)
    nxt = idx[-1] + 1 if idx.size else 0
    if nxt >= len(TAU_GRID):
        return tau, None
    margins = sweep.angle[:, nxt] - TAU_GRID[nxt] * sweep.mass
    i = int(np.argmin(margins))
    witness = _witness_pair(sweep, i)
    witness["blocked_tau"] = float(TAU_GRID[nxt])
    witness["margin"] = float(margins[i])
    return tau, witness


def delta_hat(f: evaluate.EmbeddingMap, plan: SamplingPlan):
    """Worst sampled monotonicity ratio <f(x)-f(y), x-y> / (|f(x)-f(y)| |x-y|)."""
    sweep = _segment_sweep(f.measure, plan, f.backend)
    return _delta_from_sweep(sweep)


def _delta_from_sweep(sweep: _SegmentSweep):
    gaps = sweep.emb_norm
    if np.any(gaps == 0.0):
        i = int(np.argmin(gaps))
        raise evaluate.DegenerateConfigurationError(
            f"embedding is not injective on a sampled pair: {_witness_pair(sweep, i)}")
    inner = np.einsum("ij,ij->i", sweep.emb, sweep.xs - sweep.ys)
    ratios = inner / (gaps * sweep.seg_len)
    i = int(np.argmin(ratios))
    return float(ratios[i]), _witness_pair(sweep, i)


def bilip_bounds(f: evaluate.EmbeddingMap, nu, plan: SamplingPlan):
    """Extremal sampled ratios |f(x)-f(y)| / d(x, y) with witnesses."""
    sweep = _segment_sweep(nu, plan, f.backend)
    return _bilip_from_sweep(sweep)


def _bilip_from_sweep(sweep: _SegmentSweep):
    ratios = sweep.emb_norm / sweep.mass
    i_lo = int(np.argmin(ratios))
    i_hi = int(np.argmax(ratios))
    return (float(ratios[i_lo]), float(ratios[i_hi]),
            {"low": _witness_pair(sweep, i_lo), "high": _witness_pair(sweep, i_hi)})


def cyclic_audit(f: evaluate.EmbeddingMap, plan: SamplingPlan):
    """Worst cyclic sum, normalized by the cycle's natural magnitude."""
    rng = _streams(plan)[1]
    worst = -math.inf
    witness = None
    for _ in range(plan.cycle_count):
        m = int(rng.integers(2, 9))
        pts = _sample_points(plan, rng, m)
        vals = f.eval_many(pts)
        nxt = np.roll(pts, -1, axis=0)
        total = float(np.einsum("ij,ij->", vals, nxt - pts))
        scale = float(np.sum(np.linalg.norm(vals, axis=1) * np.linalg.norm(nxt - pts, axis=1)))
        scaled = total / max(scale, 1e-300)
        if scaled > worst:
            worst = scaled
            witness = {"points": pts.tolist(), "cycle_sum": total, "scale": scale}
    return worst, witness


def cube_audit(f: evaluate.EmbeddingMap, nu, plan: SamplingPlan):
    """Worst ratio (diameter of the embedded vertex set) / (cube hyperplane mass)."""
    rng = _streams(plan)[2]
    worst = math.inf
    witness = None
    for q in _sample_cubes(plan, rng):
        mass = evaluate.cube_mass(nu, q, backend=f.backend)
        if mass <= 0.0:
            return 0.0, {"center": q.center.tolist(), "edge": q.edge, "mass": mass}
        verts = cube_vertices(q)
        imgs = f.eval_many(verts)
        diam = float(np.max(np.linalg.norm(imgs[:, None, :] - imgs[None, :, :], axis=2)))
        ratio = diam / mass
        if ratio < worst:
            worst = ratio
            witness = {"center": q.center.tolist(), "edge": q.edge,
                       "mass": mass, "vertex_diameter": diam}
    return worst, witness


def cube_bound(n: int) -> float:
    """The vertex-pair pigeonhole constant 4^-n / sqrt(n)."""
    return 4.0 ** (-n) / math.sqrt(n)


def eta_hat(f: evaluate.EmbeddingMap, metric: str, plan: SamplingPlan):
    """Empirical quasisymmetry envelope of f over sampled triples.

    ``metric`` picks the domain distance defining t = d(x,a)/d(x,b):
    "euclidean" or "projective" (the hyperplane-measure metric).  Returns
    per-bucket maxima of |f(x)-f(a)| / |f(x)-f(b)| plus the skipped-triple
    count; empty buckets are omitted, never interpolated.
    """
    return _triple_envelope(f.measure, f.backend, plan, metric, image="embed")


def id_qs_probe(nu, plan: SamplingPlan, *, backend=None):
    """Envelope of the identity map from the projective metric to the Euclidean one."""
    backend = backend or evaluate.default_backend(nu, seed=plan.seed)
    return _triple_envelope(nu, backend, plan, "projective", image="euclidean")


def _triple_envelope(nu, backend, plan, metric: str, image: str):
    if metric not in ("euclidean", "projective"):
        raise ValueError("metric must be 'euclidean' or 'projective'")
    rng = _streams(plan)[3]
    buckets: dict[int, dict] = {}
    skipped = 0
    for _ in range(plan.triple_count):
        x, a, b = _sample_points(plan, rng, 3)
        if np.all(x == a) or np.all(x == b):
            skipped += 1
            continue
        pa = backend.pair(nu, x, a)
        pb = backend.pair(nu, x, b)
        if metric == "euclidean":
            t_num, t_den = float(np.linalg.norm(x - a)), float(np.linalg.norm(x - b))
        else:
            t_num, t_den = pa.mass, pb.mass
        if image == "embed":
            r_num = float(np.linalg.norm(pa.embed))
            r_den = float(np.linalg.norm(pb.embed))
        else:
            r_num, r_den = float(np.linalg.norm(x - a)), float(np.linalg.norm(x - b))
        if t_den == 0.0 or r_den == 0.0:
            skipped += 1
            continue
        t = t_num / t_den
        ratio = r_num / r_den
        idx = int(np.searchsorted(ETA_BUCKET_EDGES, t, side="right")) - 1
        if idx < 0 or idx >= len(ETA_BUCKET_EDGES) - 1:
            skipped += 1
            continue
        cur = buckets.get(idx)
        if cur is None or ratio > cur["max_ratio"]:
            buckets[idx] = {"bucket_lo": float(ETA_BUCKET_EDGES[idx]),
                            "bucket_hi": float(ETA_BUCKET_EDGES[idx + 1]),
                            "t": t, "max_ratio": ratio,
                            "count": (cur["count"] + 1) if cur else 1}
        else:
            cur["count"] += 1
    curve = [buckets[k] for k in sorted(buckets)]
    return curve, skipped


# ---------------------------------------------------------------------------
# the full report
# ---------------------------------------------------------------------------

@dataclass
class DiagnosticsReport:
    scenario: str
    backend: str
    plan: dict
    kappa_hat: float
    kappa_witness: dict
    tau_hat: float
    tau_witness: dict | None
    delta_hat: float
    delta_witness: dict
    c_low: float
    c_high: float
    bilip_witnesses: dict
    cyclic_worst: float
    cyclic_witness: dict
    cube_worst: float
    cube_witness: dict
    cube_bound: float
    eta_curve: list
    eta_skipped: int
    id_curve: list
    id_skipped: int
    audits: list = field(default_factory=list)

    def passed(self) -> bool:
        return all(a["passed"] for a in self.audits)

    def to_dict(self) -> dict:
        return {
            "scenario": self.scenario,
            "backend": self.backend,
            "plan": self.plan,
            "kappa_hat": self.kappa_hat,
            "kappa_witness": self.kappa_witness,
            "tau_hat": self.tau_hat,
            "tau_witness": self.tau_witness,
            "delta_hat": self.delta_hat,
            "delta_witness": self.delta_witness,
            "bilip": {"c_low": self.c_low, "c_high": self.c_high,
                      "witnesses": self.bilip_witnesses},
            "cyclic": {"worst": self.cyclic_worst, "witness": self.cyclic_witness},
            "cube": {"worst": self.cube_worst, "bound": self.cube_bound,
                     "witness": self.cube_witness},
            "eta": {"curve": self.eta_curve, "skipped": self.eta_skipped},
            "id_probe": {"curve": self.id_curve, "skipped": self.id_skipped},
            "audits": self.audits,
        }

    def render_text(self) -> str:
        lines = [
            f"scenario  : {self.scenario}",
            f"backend   : {self.backend}",
            f"kappa_hat : {self.kappa_hat:.12g}",
            f"tau_hat   : {self.tau_hat:.12g}",
            f"delta_hat : {self.delta_hat:.12g}",
            f"bilip     : c_low={self.c_low:.12g} c_high={self.c_high:.12g}",
            f"cyclic    : worst normalized sum {self.cyclic_worst:.3e}",
            f"cube      : worst ratio {self.cube_worst:.6g} (bound {self.cube_bound:.6g})",
            "audits    :",
        ]
        for a in self.audits:
            flag = "PASS" if a["passed"] else "FAIL"
            lines.append(f"  [{flag}] {a['name']}: value={a['value']:.6g} bound={a['bound']:.6g}")
        return "\n".join(lines)


def run_diagnostics(nu, basepoint, plan: SamplingPlan, *, backend=None,
                    name: str = "", expectations: dict | None = None) -> DiagnosticsReport:
    """Run every estimator off one plan and check the built-in consistency chain."""
    backend = backend or evaluate.default_backend(nu, seed=plan.seed)
    f = evaluate.EmbeddingMap(nu, basepoint, backend=backend)
    sweep = _segment_sweep(nu, plan, backend)

    audits: list[dict] = []

    def audit(name_, value, bound, passed, witness=None):
        entry = {"name": name_, "value": float(value), "bound": float(bound),
                 "passed": bool(passed)}
        if witness is not None:
            entry["witness"] = witness
        audits.append(entry)

    positive = np.all(sweep.mass > 0.0)
    i_bad = int(np.argmin(sweep.mass))
    audit("segment_mass_positive", float(sweep.mass[i_bad]), 0.0, positive,
          _witness_pair(sweep, i_bad) if not positive else None)
    if not positive:
        raise evaluate.DegenerateConfigurationError(
            f"sampled segment has zero hyperplane mass: {_witness_pair(sweep, i_bad)}")

    ratios = sweep.trans / sweep.mass
    i_k = int(np.argmin(ratios))
    kappa = float(ratios[i_k])
    kappa_witness = _witness_pair(sweep, i_k)
    tau, tau_witness = _tau_from_sweep(sweep)
    delta, delta_witness = _delta_from_sweep(sweep)
    c_low, c_high, bilip_wit = _bilip_from_sweep(sweep)

    # identity and two-sided bounds on the shared pool
    inner = np.einsum("ij,ij->i", sweep.emb, sweep.xs - sweep.ys)
    target = sweep.seg_len * sweep.trans
    rel = np.abs(inner - target) / np.maximum(np.abs(target), 1e-300)
    i_r = int(np.argmax(rel))
    audit("identity_residual", float(rel[i_r]), IDENTITY_REL, bool(rel[i_r] <= IDENTITY_REL),
          _witness_pair(sweep, i_r))
    upper_gap = sweep.emb_norm - sweep.mass
    i_u = int(np.argmax(upper_gap))
    audit("lipschitz_upper", float(upper_gap[i_u]), LIP_SLACK,
          bool(upper_gap[i_u] <= LIP_SLACK), _witness_pair(sweep, i_u))
    lower_gap = sweep.trans - sweep.emb_norm
    i_l = int(np.argmax(lower_gap))
    audit("transversal_lower", float(lower_gap[i_l]), LIP_SLACK,
          bool(lower_gap[i_l] <= LIP_SLACK), _witness_pair(sweep, i_l))

    # chain: per-pair monotonicity dominates per-pair transversality
    gaps = sweep.emb_norm
    delta_pairs = inner / np.maximum(gaps * sweep.seg_len, 1e-300)
    margin = delta_pairs - ratios
    i_m = int(np.argmin(margin))
    audit("delta_vs_kappa_pairwise", float(margin[i_m]), -CHAIN_SLACK,
          bool(margin[i_m] >= -CHAIN_SLACK), _witness_pair(sweep, i_m))
    audit("kappa_vs_tau", kappa - tau * math.sin(tau), -CHAIN_SLACK,
          kappa >= tau * math.sin(tau) - CHAIN_SLACK)
    audit("bilip_low_vs_kappa", c_low - kappa, -CHAIN_SLACK, c_low >= kappa - CHAIN_SLACK)
    audit("bilip_high", c_high, 1.0 + LIP_SLACK, c_high <= 1.0 + LIP_SLACK)

    # converse threshold test at tau* = kappa/2 on the same segments
    tau_star = 0.5 * kappa
    conv_ok = True
    conv_margin = math.inf
    for i, (x, y) in enumerate(zip(sweep.xs, sweep.ys)):
        p = backend.pair(nu, x, y, taus=[tau_star])
        m = float(p.angle[0]) - tau_star * sweep.mass[i]
        conv_margin = min(conv_margin, m)
        if m < -CHAIN_SLACK * max(sweep.mass[i], 1.0):
            conv_ok = False
    audit("tau_converse_at_half_kappa", conv_margin, -CHAIN_SLACK, conv_ok)

    cyc_worst, cyc_witness = cyclic_audit(f, plan)
    audit("cyclic_monotonicity", cyc_worst, CHAIN_SLACK, cyc_worst <= CHAIN_SLACK, cyc_witness)

    cube_worst, cube_witness = cube_audit(f, nu, plan)
    bound = cube_bound(plan.dim)
    audit("cube_noncollapsing", cube_worst, bound - CHAIN_SLACK,
          cube_worst >= bound - CHAIN_SLACK, cube_witness)

    eta_curve, eta_skipped = eta_hat(f, "euclidean", plan)
    id_curve, id_skipped = id_qs_probe(nu, plan, backend=backend)

    for key, val in (expectations or {}).items():
        current = {
            "kappa_min": (kappa, lambda v, b: v >= b),
            "kappa_max": (kappa, lambda v, b: v <= b),
            "delta_min": (delta, lambda v, b: v >= b),
            "c_low_min": (c_low, lambda v, b: v >= b),
            "c_high_max": (c_high, lambda v, b: v <= b),
            "tau_min": (tau, lambda v, b: v >= b),
        }.get(key)
        if current is None:
            raise ValueError(f"unknown expectation {key!r}")
        value, cmp = current
        audit(f"expect.{key}", value, val, cmp(value, val),
              kappa_witness if "kappa" in key else None)

    return DiagnosticsReport(
        scenario=name,
        backend=getattr(backend, "name", "unknown"),
        plan=plan.to_dict(),
        kappa_hat=kappa,
        kappa_witness=kappa_witness,
        tau_hat=tau,
        tau_witness=tau_witness,
        delta_hat=delta,
        delta_witness=delta_witness,
        c_low=c_low,
        c_high=c_high,
        bilip_witnesses=bilip_wit,
        cyclic_worst=cyc_worst,
        cyclic_witness=cyc_witness,
        cube_worst=cube_worst,
        cube_witness=cube_witness,
        cube_bound=bound,
        eta_curve=eta_curve,
        eta_skipped=eta_skipped,
        id_curve=id_curve,
        id_skipped=id_skipped,
        audits=audits,
    )
