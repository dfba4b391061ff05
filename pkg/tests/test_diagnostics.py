import json
import math

import numpy as np
import pytest

from busemetric import (BaseMeasure1D, EmbeddingMap, OffsetDirection, SymmetricCap,
                        UniformDirections, crofton, degenerate_caps, run_diagnostics)
from busemetric.diagnostics import (SamplingPlan, bilip_bounds, cube_bound, cyclic_audit,
                                    delta_hat, eta_hat, id_qs_probe, kappa_hat, tau_hat)


def crofton_plan(seed=11, **kw):
    base = dict(region_lo=(-1.0, -1.0), region_hi=(1.0, 1.0), pair_count=80,
                cycle_count=40, cube_count=20, triple_count=80,
                scale_range=(0.02, 0.5), seed=seed)
    base.update(kw)
    return SamplingPlan(**base)


@pytest.fixture(scope="module")
def crofton_report():
    sc = crofton(2)
    return run_diagnostics(sc.measure, sc.basepoint, crofton_plan(), name=sc.name)


def test_crofton_closed_form_anchors(crofton_report):
    rep = crofton_report
    assert rep.kappa_hat == pytest.approx(math.pi / 4.0, abs=1e-12)
    assert rep.delta_hat == pytest.approx(1.0, abs=1e-9)
    assert rep.c_low == pytest.approx(math.pi / 4.0, abs=1e-12)
    assert rep.c_high == pytest.approx(math.pi / 4.0, abs=1e-12)
    # largest grid threshold with cos(tau) >= tau: the fixed point of cosine
    # lies in (0.73, 0.74)
    assert rep.tau_hat == 0.73
    assert rep.cube_worst == pytest.approx(math.pi * math.sqrt(2.0) / 8.0, abs=1e-9)
    assert rep.passed()


def test_crofton_eta_envelope_is_linear(crofton_report):
    for bucket in crofton_report.eta_curve:
        assert bucket["max_ratio"] == pytest.approx(bucket["t"], abs=1e-9)
    for bucket in crofton_report.id_curve:
        # identity from the projective metric to the Euclidean one rescales
        # both legs by the same factor, so the envelope is linear as well
        assert bucket["max_ratio"] == pytest.approx(bucket["t"], abs=1e-9)
    ratios = [b["max_ratio"] for b in crofton_report.eta_curve]
    assert ratios == sorted(ratios)


def test_witnesses_reproduce_reported_extrema(crofton_report):
    rep = crofton_report
    w = rep.kappa_witness
    assert w["transversal"] / w["mass"] == pytest.approx(rep.kappa_hat, rel=1e-12)
    lo = rep.bilip_witnesses["low"]
    assert lo["embed_gap"] / lo["mass"] == pytest.approx(rep.c_low, rel=1e-12)


def test_report_deterministic_and_serializable(crofton_report):
    sc = crofton(2)
    again = run_diagnostics(sc.measure, sc.basepoint, crofton_plan(), name=sc.name)
    assert json.dumps(crofton_report.to_dict(), sort_keys=True) == \
        json.dumps(again.to_dict(), sort_keys=True)
    text = crofton_report.render_text()
    assert "kappa_hat" in text and "[PASS]" in text


def test_kappa_is_one_on_orthogonal_concentration():
    # directions concentrated on normals parallel to the probed segments
    nu = OffsetDirection(SymmetricCap((1.0, 0.0), 0.01),
                         BaseMeasure1D.lebesgue(-20, 20, 1.0))
    from busemetric.evaluate import pair_integrals
    p = pair_integrals(nu, np.array([-0.5, 0.0]), np.array([0.5, 0.0]))
    assert p.transversal / p.mass >= 0.9999


def test_kappa_cap_bound_on_parallel_segments():
    # a single cap leaves segments parallel to its hyperplanes nearly
    # invisible: their transversality ratio is at most sin(theta0)
    theta0 = 0.3
    nu = OffsetDirection(SymmetricCap((1.0, 0.0), theta0),
                         BaseMeasure1D.lebesgue(-20, 20, 1.0))
    from busemetric.evaluate import pair_integrals
    p = pair_integrals(nu, np.array([0.0, -0.5]), np.array([0.0, 0.5]))
    assert p.transversal / p.mass <= math.sin(theta0) + 1e-12


def test_individual_estimators_share_the_pool():
    sc = crofton(2)
    plan = crofton_plan(seed=23)
    k, kw = kappa_hat(sc.measure, plan)
    t = tau_hat(sc.measure, plan)
    f = EmbeddingMap(sc.measure, sc.basepoint)
    d, dw = delta_hat(f, plan)
    lo, hi, _ = bilip_bounds(f, sc.measure, plan)
    assert k == pytest.approx(math.pi / 4, abs=1e-12)
    assert d == pytest.approx(1.0, abs=1e-9)
    assert lo <= hi <= 1.0
    assert k >= t * math.sin(t) - 1e-10
    assert lo >= k - 1e-10


def test_cyclic_audit_pair_case_and_symmetries():
    sc = crofton(2)
    f = EmbeddingMap(sc.measure, sc.basepoint)
    # m = 2: the cyclic sum collapses to -<f(x)-f(y), x-y>, plain monotonicity
    x, y = np.array([0.3, -0.2]), np.array([-0.5, 0.6])
    s = float(f.eval(x) @ (y - x)) + float(f.eval(y) @ (x - y))
    assert s == pytest.approx(-float((f.eval(x) - f.eval(y)) @ (x - y)), abs=1e-14)
    assert s <= 0.0
    # linear map: the cycle sum is -(1/2n) * sum of squared steps
    rng = np.random.default_rng(31)
    pts = rng.uniform(-1, 1, (5, 2))
    vals = np.stack([f.eval(p) for p in pts])
    nxt = np.roll(pts, -1, axis=0)
    total = float(np.einsum("ij,ij->", vals, nxt - pts))
    expected = -0.25 * float(np.sum(np.linalg.norm(nxt - pts, axis=1) ** 2))
    assert total == pytest.approx(expected, abs=1e-12)
    # cyclic permutation preserves the sum; reversal stays within tolerance
    perm = np.roll(pts, 2, axis=0)
    vals_p = np.stack([f.eval(p) for p in perm])
    total_p = float(np.einsum("ij,ij->", vals_p, np.roll(perm, -1, axis=0) - perm))
    assert total_p == pytest.approx(total, abs=1e-12)
    rev = pts[::-1]
    vals_r = np.stack([f.eval(p) for p in rev])
    total_r = float(np.einsum("ij,ij->", vals_r, np.roll(rev, -1, axis=0) - rev))
    assert total_r <= 1e-10


def test_cyclic_audit_runs(crofton_report):
    sc = crofton(2)
    f = EmbeddingMap(sc.measure, sc.basepoint)
    worst, witness = cyclic_audit(f, crofton_plan())
    assert worst <= 1e-10
    assert "points" in witness


def test_cube_bound_constants():
    assert cube_bound(2) == pytest.approx(4.0 ** -2 / math.sqrt(2.0), rel=1e-14)
    assert cube_bound(2) == pytest.approx(0.0441941738, abs=1e-9)
    assert cube_bound(3) == pytest.approx(4.0 ** -3 / math.sqrt(3.0), rel=1e-14)
    assert cube_bound(3) == pytest.approx(0.00902, abs=1e-5)


def test_degenerate_family_bilip_contrast():
    plan = SamplingPlan(region_lo=(-0.3, -0.3), region_hi=(0.3, 0.3), pair_count=60,
                        cycle_count=10, cube_count=8, triple_count=20,
                        scale_range=(0.02, 0.25), seed=17)
    reports = {}
    for theta in (0.4, 0.05):
        sc = degenerate_caps(theta, levels=5)
        reports[theta] = run_diagnostics(sc.measure, sc.basepoint, plan, name=sc.name)
    assert reports[0.05].kappa_hat < reports[0.4].kappa_hat
    assert reports[0.05].c_low < reports[0.4].c_low
    for rep in reports.values():
        assert rep.c_high <= 1.0 + 1e-12
        assert rep.passed()
    # the identity-map envelope spreads as the caps narrow
    def spread(rep):
        return max(b["max_ratio"] / b["t"] for b in rep.id_curve)
    assert spread(reports[0.05]) > spread(reports[0.4])


def test_eta_hat_projective_metric_choice():
    sc = crofton(2)
    f = EmbeddingMap(sc.measure, sc.basepoint)
    curve, skipped = eta_hat(f, "projective", crofton_plan(seed=41))
    for bucket in curve:
        # projective t rescales Euclidean t by 1 for this isotropic measure
        assert bucket["max_ratio"] == pytest.approx(bucket["t"], abs=1e-9)
    with pytest.raises(ValueError):
        eta_hat(f, "hyperbolic", crofton_plan())


def test_id_probe_matches_eta_of_identity():
    sc = crofton(2)
    curve, skipped = id_qs_probe(sc.measure, crofton_plan(seed=43))
    assert curve, "identity probe produced no buckets"
    for bucket in curve:
        assert bucket["max_ratio"] == pytest.approx(bucket["t"], abs=1e-9)


def test_expectations_audit():
    sc = crofton(2)
    rep = run_diagnostics(sc.measure, sc.basepoint, crofton_plan(),
                          name=sc.name, expectations={"kappa_min": 0.9})
    assert not rep.passed()
    failing = [a for a in rep.audits if not a["passed"]]
    assert failing[0]["name"] == "expect.kappa_min"
    assert "witness" in failing[0]
    with pytest.raises(ValueError):
        run_diagnostics(sc.measure, sc.basepoint, crofton_plan(),
                        expectations={"bogus": 1.0})


def test_ba_envelope_anchors():
    # seed-fixed regression anchors from the first run: the axis-extension
    # embedding keeps a bounded quasisymmetry envelope on the sampled window
    from busemetric import BaseMeasure1D, beurling_ahlfors
    sc = beurling_ahlfors(BaseMeasure1D.lebesgue(-30.0, 30.0, 1.0), window_half=3.0)
    plan = SamplingPlan(region_lo=(-2.0, 0.1), region_hi=(2.0, 1.5),
                        pair_count=60, triple_count=200, scale_range=(0.05, 0.8),
                        seed=555)
    curve, skipped = eta_hat(sc.embedding(), "euclidean", plan)
    window = [b["max_ratio"] for b in curve if 0.1 <= b["t"] <= 10.0]
    assert skipped == 0
    assert max(window) < 40.0
    assert max(window) == 38.774750431528204
    id_curve, _ = id_qs_probe(sc.measure, plan)
    id_window = [b["max_ratio"] for b in id_curve if 0.1 <= b["t"] <= 10.0]
    assert max(id_window) == 7.195182560381117


def test_sampler_measure_full_diagnostics():
    # the MC backend shares one batch across every query, so even an opaque
    # sampler measure passes the structural audit chain
    import math as _math
    from busemetric import MonteCarlo, SamplerMeasure
    span = 12.0

    def sample(rng, m):
        phi = rng.random(m) * _math.pi
        normals = np.column_stack([np.cos(phi), np.sin(phi)])
        offsets = rng.uniform(-span, span, m)
        return normals, offsets, np.full(m, 2.0 * span)

    nu = SamplerMeasure(2, sample, bounding_lo=(-1.0, -1.0), bounding_hi=(1.0, 1.0))
    plan = SamplingPlan(region_lo=(-1.0, -1.0), region_hi=(1.0, 1.0), pair_count=60,
                        cycle_count=20, cube_count=12, triple_count=30,
                        scale_range=(0.05, 0.5), seed=888)
    rep = run_diagnostics(nu, np.zeros(2), plan,
                          backend=MonteCarlo(budget=60_000, seed=777), name="sampler")
    assert rep.passed(), [a["name"] for a in rep.audits if not a["passed"]]
    # the sampler wraps the isotropic measure, so kappa sits near pi/4
    assert rep.kappa_hat == pytest.approx(_math.pi / 4.0, abs=0.08)
    assert rep.c_high <= 1.0 + 1e-12
    assert rep.cyclic_worst <= 1e-10


def test_report_scale_equivariance():
    # scaling the measure's weights rescales distances and the embedding but
    # leaves every ratio-valued report entry unchanged
    from busemetric import BaseMeasureND, PositionDirection
    mu = BaseMeasureND(2, atoms=[((2.0, 0.3), 1.0), ((-1.1, 1.7), 2.0), ((0.4, -2.2), 1.5)])
    nu = PositionDirection(mu, UniformDirections(2))
    plan = SamplingPlan(region_lo=(-0.4, -0.4), region_hi=(0.4, 0.4), pair_count=50,
                        cycle_count=16, cube_count=10, triple_count=30,
                        scale_range=(0.02, 0.3), seed=37)
    o = np.zeros(2)
    a = run_diagnostics(nu, o, plan, name="base")
    b = run_diagnostics(nu.scaled(7.3), o, plan, name="scaled")
    assert b.kappa_hat == pytest.approx(a.kappa_hat, abs=1e-10)
    assert b.tau_hat == a.tau_hat
    assert b.delta_hat == pytest.approx(a.delta_hat, abs=1e-10)
    assert b.c_low == pytest.approx(a.c_low, abs=1e-10)
    assert b.c_high == pytest.approx(a.c_high, abs=1e-10)
    assert b.cube_worst == pytest.approx(a.cube_worst, abs=1e-10)
    for ba, bb in zip(a.eta_curve, b.eta_curve):
        assert bb["max_ratio"] == pytest.approx(ba["max_ratio"], abs=1e-10)


def test_report_translation_equivariance():
    from busemetric import BaseMeasureND, PositionDirection
    mu = BaseMeasureND(2, atoms=[((2.0, 0.3), 1.0), ((-1.1, 1.7), 2.0), ((0.4, -2.2), 1.5)])
    nu = PositionDirection(mu, UniformDirections(2))
    shift = np.array([11.0, -6.0])
    plan = SamplingPlan(region_lo=(-0.4, -0.4), region_hi=(0.4, 0.4), pair_count=50,
                        cycle_count=16, cube_count=10, triple_count=30,
                        scale_range=(0.02, 0.3), seed=39)
    plan_shifted = SamplingPlan(region_lo=tuple(np.asarray(plan.region_lo) + shift),
                                region_hi=tuple(np.asarray(plan.region_hi) + shift),
                                pair_count=50, cycle_count=16, cube_count=10,
                                triple_count=30, scale_range=(0.02, 0.3), seed=39)
    a = run_diagnostics(nu, np.zeros(2), plan, name="base")
    b = run_diagnostics(nu.translated(shift), shift, plan_shifted, name="moved")
    assert b.kappa_hat == pytest.approx(a.kappa_hat, abs=1e-10)
    assert b.tau_hat == a.tau_hat
    assert b.delta_hat == pytest.approx(a.delta_hat, abs=1e-10)
    assert b.c_low == pytest.approx(a.c_low, abs=1e-10)
    assert b.c_high == pytest.approx(a.c_high, abs=1e-10)
    assert b.cyclic_worst == pytest.approx(a.cyclic_worst, abs=1e-10)
    assert b.cube_worst == pytest.approx(a.cube_worst, abs=1e-10)


def test_degenerate_segment_is_surfaced():
    # a direction support disjoint from the wedges subtended at the only atom
    # leaves sampled segments with exactly zero mass; the witness is surfaced
    from busemetric import ArcDensity2D, BaseMeasureND, PositionDirection
    from busemetric.geometry import DegenerateConfigurationError
    mu = BaseMeasureND(2, atoms=[((5.0, 0.0), 1.0)])
    nu = PositionDirection(mu, ArcDensity2D([(2.6, 2.8, 1.0)]))
    plan = SamplingPlan(region_lo=(-0.2, -0.2), region_hi=(0.2, 0.2), pair_count=30,
                        scale_range=(0.02, 0.1), seed=41)
    with pytest.raises(DegenerateConfigurationError, match="mass"):
        kappa_hat(nu, plan)


def test_plan_validation():
    with pytest.raises(ValueError):
        SamplingPlan(region_lo=(0.0, 0.0), region_hi=(0.0, 1.0))
    with pytest.raises(ValueError):
        SamplingPlan(region_lo=(0.0, 0.0), region_hi=(1.0, 1.0), scale_range=(0.0, 1.0))
