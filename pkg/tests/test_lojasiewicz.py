import math

import numpy as np
import pytest

from harmonicflow import (
    FlowControl,
    MapField,
    build_circle,
    constant_map,
    convergence_classifier,
    degree_circle_map,
    energy,
    fit_exponent,
    identity_sphere_map,
    morse_bott_report,
    perturbed_constant_map,
    random_tangent_field,
    run_flow,
    sample_neighborhood,
    validate_exponents,
    verify_inequality,
)
from harmonicflow.charts import chart_push
from harmonicflow.errors import (
    DegenerateWindow,
    InsufficientDecades,
    InsufficientTail,
    NotCritical,
)
from harmonicflow.flow import FlowSample, FlowTrace
from harmonicflow.lojasiewicz import gradient_dual_norm
from harmonicflow.meshes import sobolev_norm
from harmonicflow.rng import stream


# ---------------------------------------------------------------------------
# hypothesis tables

def hand_table(d, k, p, variant):
    """Independently transcribed admissibility table (test-side oracle).

    Structured as explicit per-case data rather than clause logic: for each
    (d, k) the admissible p-range is written out.
    """
    base_ok = p > 1 and k * p > d and not (k == 2 and p <= 1)
    if d < 2 or k < 1 or not base_ok:
        return False
    if variant == "wk":
        return True
    # l2 ranges, written per (d, k) case
    if k == 1:
        ranges = {2: (2.0, math.inf, False), 3: (3.0, 6.0, True)}
        if d not in ranges:
            return False
        lo, hi, closed_hi = ranges[d]
        return p > lo and (p <= hi if closed_hi else p < hi)
    return p >= 2  # k >= 2 (kp > d already enforced)


def test_spec_example_rows():
    assert validate_exponents(2, 1, 3, "wk").admissible
    assert validate_exponents(3, 1, 6, "l2").admissible
    assert not validate_exponents(4, 1, 5, "l2").admissible
    v = validate_exponents(2, 2, 1, "wk")
    assert not v.admissible
    assert "p > 1" in v.reason


def test_full_grid_matches_hand_table():
    mismatches = []
    for d in (2, 3, 4, 5):
        for k in (1, 2, 3):
            for p in (1.0, 1.5, 2.0, 3.0, 6.0, 8.0):
                for variant in ("wk", "l2"):
                    got = validate_exponents(d, k, p, variant).admissible
                    want = hand_table(d, k, p, variant)
                    if got != want:
                        mismatches.append((d, k, p, variant, got, want))
    assert mismatches == []


def test_reason_names_the_failing_clause():
    assert "kp > d" in validate_exponents(2, 1, 1.5, "wk").reason
    assert "d < 4" in validate_exponents(5, 1, 8, "l2").reason
    assert "p <= 6" in validate_exponents(3, 1, 8, "l2").reason
    assert "p >= 2" in validate_exponents(2, 2, 1.5, "l2").reason


# ---------------------------------------------------------------------------
# neighborhood sampling

def test_sample_neighborhood_empty(ico2, s2):
    assert sample_neighborhood(constant_map(ico2, s2), 0.1, 0) == []


def test_samples_satisfy_neighborhood_condition(ico2, s2):
    f_inf = constant_map(ico2, s2)
    sigma = 0.1
    samples = sample_neighborhood(f_inf, sigma, 16, norm=(1, 2.0), seed=2)
    assert len(samples) == 16
    for f in samples:
        assert sobolev_norm(ico2, f.values - f_inf.values, 1, 2.0) < sigma


def test_sample_energies_spread_three_decades(ico3, s2):
    samples = sample_neighborhood(constant_map(ico3, s2), 0.1, 32, seed=1)
    gaps = [energy(f) for f in samples]
    assert math.log10(max(gaps) / min(gaps)) >= 3.0


# ---------------------------------------------------------------------------
# inequality verification

def test_verify_at_limit_map_margin_zero(ico2, s2):
    f_inf = constant_map(ico2, s2)
    rep = verify_inequality([f_inf], f_inf, 0.5, 0.9)
    assert rep.min_margin == pytest.approx(0.0, abs=1e-12)


def test_verify_constant_basin_ratio(ico3, s2):
    f_inf = constant_map(ico3, s2)
    samples = sample_neighborhood(f_inf, 0.1, 32, seed=5)
    rep = verify_inequality(samples, f_inf, 0.5, 0.9)
    assert rep.min_ratio >= 0.9
    assert rep.min_margin > 0.0


def test_wrong_exponent_ratios_diverge(ico3, s2):
    # theta = 0.9 overshoots: the ratio grows as the energy gap shrinks
    f_inf = constant_map(ico3, s2)
    samples = sample_neighborhood(f_inf, 0.1, 32, seed=5)
    rep = verify_inequality(samples, f_inf, 0.9, 1.0)
    rows = sorted(rep.rows)  # ascending energy gap
    assert rows[0][2] > 5.0 * rows[-1][2]


def test_verify_dual_norm_variant_runs(ico2, s2):
    f_inf = constant_map(ico2, s2)
    samples = sample_neighborhood(f_inf, 0.05, 4, seed=3)
    rep = verify_inequality(samples, f_inf, 0.5, 0.1, norm_used="wk_minus_2_p", dual_p=3.0)
    assert rep.min_ratio > 0.0
    assert all(gn > 0 for _, gn, _ in rep.rows)


def test_dual_norm_bounded_by_l2(ico2, s2):
    # (M, v) <= |M| |v| and |v|_L2 <= |v|_W11' family: dual norm below L2 norm
    from harmonicflow.meshes import l2_norm
    from harmonicflow import tension

    f = perturbed_constant_map(ico2, s2, 0.1, stream(4, "dual"))
    dual = gradient_dual_norm(f, p=3.0)
    assert 0.0 < dual <= l2_norm(ico2, tension(f).values)


# ---------------------------------------------------------------------------
# exponent fitting

def synthetic_trace(theta=0.5, z=1.0, n=64, lo=1e-9, hi=1e-1):
    gaps = np.geomspace(lo, hi, n)
    trace = FlowTrace()
    for i, gap in enumerate(gaps):
        trace.samples.append(
            FlowSample(float(i), gap, z * gap**theta, float("nan"), 1.0)
        )
    return trace


def test_fit_exact_power_law(ico2, s2):
    f_inf = constant_map(ico2, s2)  # energy 0: gaps equal raw energies
    tr = synthetic_trace(theta=0.5, z=1.0)
    fit = fit_exponent(tr, f_inf, window=(1e-8, 1e-2))
    assert fit.theta_hat == pytest.approx(0.5, abs=1e-9)
    assert fit.z_hat == pytest.approx(1.0, rel=1e-9)
    assert fit.r_squared == pytest.approx(1.0, abs=1e-12)


def test_fit_energy_rescaling_moves_z_not_theta(ico2, s2):
    f_inf = constant_map(ico2, s2)
    theta, c = 0.5, 7.0
    tr = synthetic_trace(theta=theta, z=1.0)
    scaled = FlowTrace()
    for s in tr.samples:
        scaled.samples.append(
            FlowSample(s.t, c * s.energy, c * s.grad_norm_l2, float("nan"), s.dt)
        )
    fit0 = fit_exponent(tr, f_inf, window=(1e-8, 1e-2))
    fit1 = fit_exponent(scaled, f_inf, window=(c * 1e-8, c * 1e-2))
    assert fit1.theta_hat == pytest.approx(fit0.theta_hat, abs=1e-9)
    assert fit1.z_hat == pytest.approx(fit0.z_hat * c ** (1 - theta), rel=1e-9)


def test_fit_window_errors(ico2, s2):
    f_inf = constant_map(ico2, s2)
    tr = synthetic_trace()
    with pytest.raises(DegenerateWindow):
        fit_exponent(tr, f_inf, window=(1e-2, 1e-8))
    with pytest.raises(InsufficientDecades):
        fit_exponent(tr, f_inf, window=(1e-4, 1.5e-4))


def test_fit_constant_basin_flow(ico2, s2):
    f0 = perturbed_constant_map(ico2, s2, 0.1, stream(6, "fit"))
    tr = run_flow(f0, FlowControl(dt0=1e-5, grad_tol=1e-9))
    f_inf = MapField(tr.final_values, s2, ico2)
    fit = fit_exponent(tr, f_inf)
    assert 0.45 <= fit.theta_hat <= 0.55
    assert fit.r_squared >= 0.99


def test_fit_geodesic_basin_circle(s1):
    mesh = build_circle(128)
    f1 = degree_circle_map(mesh, s1, 1)
    u = random_tangent_field(f1, stream(21, "s"))
    u.values *= 0.15 / u.linf()
    f0 = chart_push(f1, u)
    tr = run_flow(f0, FlowControl(dt0=1e-5, grad_tol=1e-10))
    f_inf = MapField(tr.final_values, s1, mesh)
    fit = fit_exponent(tr, f_inf)
    assert 0.45 <= fit.theta_hat <= 0.55
    rep = morse_bott_report(f_inf, 1, grad_tol=1e-10)
    assert rep.verdict == "morse_bott"
    assert rep.kernel_dim == 1
    assert rep.predicted_theta == 0.5


def test_scale_coherence_fit_on_sampled_family(ico3, s2):
    # exponent recovered from a family that passes verify_inequality
    f_inf = constant_map(ico3, s2)
    samples = sample_neighborhood(f_inf, 0.1, 48, seed=1)
    rep = verify_inequality(samples, f_inf, 0.5, 0.9)
    assert rep.min_ratio >= 0.9
    fit = fit_exponent(samples, f_inf, window=(1e-10, 1e-2))
    assert 0.42 <= fit.theta_hat <= 0.58


# ---------------------------------------------------------------------------
# Morse-Bott reports

def test_morse_bott_constant_sphere(ico3, s2):
    rep = morse_bott_report(constant_map(ico3, s2), 2)
    assert rep.verdict == "morse_bott"
    assert rep.kernel_dim == 2
    assert rep.predicted_theta == 0.5
    assert rep.gap_ratio >= 10


def test_morse_bott_constant_circle(s1):
    mesh = build_circle(128)
    rep = morse_bott_report(constant_map(mesh, s1), 1)
    assert rep.verdict == "morse_bott"
    assert rep.kernel_dim == 1


def test_morse_bott_tolerance_abuse_detected(ico2, s2):
    f = constant_map(ico2, s2)
    op_tol_scale = 1e6  # kernel_tol far above the spectral gap
    rep = morse_bott_report(f, 2, kernel_tol=op_tol_scale)
    assert rep.verdict == "inconclusive"
    assert rep.predicted_theta is None


def test_morse_bott_wrong_expected_dim_degenerate(ico2, s2):
    rep = morse_bott_report(constant_map(ico2, s2), 5)
    assert rep.verdict == "degenerate"


def test_morse_bott_requires_critical_point(ico2, s2):
    f = perturbed_constant_map(ico2, s2, 0.1, stream(7, "mb"))
    with pytest.raises(NotCritical):
        morse_bott_report(f, 2)


def test_morse_bott_rotation_invariant(ico2, s2):
    f = constant_map(ico2, s2)
    th = 0.4
    Q = np.array(
        [[math.cos(th), 0, math.sin(th)], [0, 1, 0], [-math.sin(th), 0, math.cos(th)]]
    )
    fq = MapField(f.values @ Q.T, s2, ico2)
    a = morse_bott_report(f, 2)
    b = morse_bott_report(fq, 2)
    assert a.verdict == b.verdict == "morse_bott"
    assert a.kernel_dim == b.kernel_dim


def test_morse_bott_identity_map(ico3, s2):
    f = identity_sphere_map(ico3, s2)
    # identity is harmonic in the continuum; discrete tension is O(h)
    rep = morse_bott_report(f, 6, kernel_tol=0.1, grad_tol=0.01, n_modes=16)
    assert rep.verdict == "morse_bott"
    assert rep.kernel_dim == 6


# ---------------------------------------------------------------------------
# convergence classification

def exp_trace(rate, n=200, t1=12.0):
    tr = FlowTrace()
    for t in np.linspace(0.1, t1, n):
        tr.samples.append(FlowSample(float(t), 0.0, math.exp(-rate * t), float("nan"), 0.1))
    return tr


def power_trace(expo, n=200):
    tr = FlowTrace()
    for t in np.geomspace(40.0, 4000.0, n):
        tr.samples.append(FlowSample(float(t), 0.0, t**expo, float("nan"), 0.1))
    return tr


def test_classifier_synthetic_exponential():
    v = convergence_classifier(exp_trace(3.0))
    assert v.model == "exponential"
    assert v.rate == pytest.approx(3.0, abs=1e-6)


def test_classifier_synthetic_power_law():
    v = convergence_classifier(power_trace(-2.0))
    assert v.model == "power_law"
    assert v.exponent == pytest.approx(-2.0, abs=1e-6)


def test_classifier_flow_rate_matches_spectral_gap(ico2, s2):
    f0 = perturbed_constant_map(ico2, s2, 0.1, stream(8, "cls"))
    tr = run_flow(f0, FlowControl(dt0=1e-5, grad_tol=1e-9))
    v = convergence_classifier(tr)
    assert v.model == "exponential"
    assert abs(v.rate - 2.0) <= 0.4  # within 20% of the linearized prediction


def test_classifier_insufficient_tail():
    with pytest.raises(InsufficientTail):
        convergence_classifier(exp_trace(3.0, n=5))


# ---------------------------------------------------------------------------
# property tests

from hypothesis import given, settings
from hypothesis import strategies as st


@settings(max_examples=200, deadline=None)
@given(
    d=st.integers(2, 6),
    k=st.integers(1, 4),
    p=st.floats(1.0, 10.0),
)
def test_l2_admissibility_implies_wk_property(d, k, p):
    # the L2 inequality strengthens the W-form hypotheses, never weakens them
    if validate_exponents(d, k, p, "l2").admissible:
        assert validate_exponents(d, k, p, "wk").admissible


@settings(max_examples=100, deadline=None)
@given(d=st.integers(2, 6), k=st.integers(1, 4), p=st.floats(1.0, 10.0))
def test_validate_exponents_total_property(d, k, p):
    for variant in ("wk", "l2"):
        v = validate_exponents(d, k, p, variant)
        assert isinstance(v.admissible, bool)
        assert v.reason


def test_gradient_family_norm_orders(ico2, s2):
    from harmonicflow.lojasiewicz import gradient_family_norm
    from harmonicflow.meshes import lp_norm
    from harmonicflow import tension
    from harmonicflow.errors import UnsupportedOrder as UO

    f = perturbed_constant_map(ico2, s2, 0.1, stream(12, "fam"))
    # k = 2: plain L^p norm of the tension field
    assert gradient_family_norm(f, 2, 3.0) == lp_norm(ico2, tension(f).values, 3.0)
    # k = 1: dual-norm stand-in, dominated by the L2 norm
    from harmonicflow.meshes import l2_norm as _l2
    assert 0.0 < gradient_family_norm(f, 1, 3.0) <= _l2(ico2, tension(f).values)
    with pytest.raises(UO):
        gradient_family_norm(f, 3, 2.0)
