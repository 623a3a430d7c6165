"""Gradient-inequality verification, exponent fitting, and rate classification.

The inequality under test is |M(f)| >= Z |E(f) - E(f_inf)|^theta for maps in
a Sobolev neighborhood of a critical point, with theta = 1/2 predicted
whenever the critical set is a manifold matching the Hessian kernel.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .charts import chart_push
from .energy import energy, hessian_matrix, hessian_spectrum, tension
from .errors import (
    DegenerateWindow,
    InsufficientDecades,
    InsufficientTail,
    NotCritical,
    UnsupportedOrder,
)
from .fields import MapField, random_tangent_field
from .flow import FlowTrace
from .meshes import l2_inner, l2_norm, lp_norm, mode_basis, sobolev_norm
from .rng import stream

__all__ = [
    "ExponentVerdict",
    "validate_exponents",
    "sample_neighborhood",
    "InequalityReport",
    "verify_inequality",
    "LojasiewiczFit",
    "fit_exponent",
    "MorseBottReport",
    "morse_bott_report",
    "ConvergenceVerdict",
    "convergence_classifier",
    "gradient_dual_norm",
]


# ---------------------------------------------------------------------------
# hypothesis tables

@dataclass(frozen=True)
class ExponentVerdict:
    admissible: bool
    reason: str


def validate_exponents(d: int, k: int, p: float, variant: str) -> ExponentVerdict:
    """Admissibility of (d, k, p) for the W^{k-2,p} or L2 inequality.

    ``variant`` is "wk" (gradient measured in W^{k-2,p}) or "l2".  The clause
    structure mirrors the hypothesis tables: kp > d with p in (1, inf) for
    the W-form; the L2 form additionally needs one of
      (1) d = 2, k = 1, 2 < p;  (2) d = 3, k = 1, 3 < p <= 6;
      (3) d >= 2, k >= 2, 2 <= p;
    first-order cases are excluded outright for d >= 4.
    """
    if variant not in ("wk", "l2"):
        raise ValueError(f"unknown variant {variant!r}")
    if d < 2:
        return ExponentVerdict(False, f"source dimension d = {d} < 2")
    if k < 1:
        return ExponentVerdict(False, f"derivative order k = {k} < 1")
    if k == 2 and p <= 1:
        return ExponentVerdict(False, "second-order case requires p > 1")
    if p <= 1:
        return ExponentVerdict(False, f"requires p > 1, got p = {p}")
    if k * p <= d:
        return ExponentVerdict(False, f"requires kp > d, got kp = {k * p}, d = {d}")
    if variant == "wk":
        return ExponentVerdict(True, f"kp = {k * p} > d = {d} with p in (1, inf)")
    # l2 variant
    if k == 1:
        if d >= 4:
            return ExponentVerdict(
                False, "L2 form with k = 1 requires d < 4 (duality exponent fails)"
            )
        if d == 2:
            return ExponentVerdict(True, "d = 2, k = 1, p > 2")
        # d == 3
        if p > 6:
            return ExponentVerdict(False, "d = 3, k = 1 requires 3 < p <= 6")
        return ExponentVerdict(True, "d = 3, k = 1, 3 < p <= 6")
    if p < 2:
        return ExponentVerdict(False, "L2 form with k >= 2 requires p >= 2")
    return ExponentVerdict(True, f"k = {k} >= 2, p >= 2, kp > d")


# ---------------------------------------------------------------------------
# neighborhood sampling

def sample_neighborhood(
    f_inf: MapField,
    sigma: float,
    count: int,
    norm: tuple[int, float] = (1, 2.0),
    seed: int = 0,
) -> list[MapField]:
    """Seeded random maps with |f - f_inf|_{W^{k,p}} uniform in (0, sigma)."""
    k, p = norm
    rng = stream(seed, "loja-neighborhood")
    mesh = f_inf.mesh
    out: list[MapField] = []
    for _ in range(int(count)):
        u = random_tangent_field(f_inf, rng)
        target_norm = sigma * rng.uniform(0.0, 1.0)
        n_u = sobolev_norm(mesh, u.values, k, p)
        if n_u == 0.0:
            continue
        u.values *= target_norm / n_u
        f = chart_push(f_inf, u)
        # enforce the neighborhood condition on the map difference itself
        for _ in range(8):
            d = sobolev_norm(mesh, f.values - f_inf.values, k, p)
            if d < sigma:
                break
            u.values *= 0.9 * sigma / d
            f = chart_push(f_inf, u)
        out.append(f)
    return out


def gradient_dual_norm(f: MapField, p: float, seed: int = 0, probes: int = 32) -> float:
    """Discrete stand-in for |M(f)| in W^{-1,p'}: sup of (M, v) / |v|_{W^{1,p'}}
    over a band-limited test family."""
    m = tension(f).values
    mesh = f.mesh
    pprime = p / (p - 1.0)
    basis = mode_basis(mesh)
    rng = stream(seed, "dual-norm")
    best = 0.0
    n = f.target.ambient_dim
    tests = []
    for j in range(basis.shape[1]):
        for c in range(n):
            v = np.zeros((mesh.vertex_count, n))
            v[:, c] = basis[:, j]
            tests.append(v)
    for _ in range(probes):
        tests.append(basis @ rng.standard_normal((basis.shape[1], n)))
    for v in tests:
        nv = sobolev_norm(mesh, v, 1, pprime)
        if nv == 0.0:
            continue
        best = max(best, abs(l2_inner(mesh, m, v)) / nv)
    return best


# ---------------------------------------------------------------------------
# inequality verification

@dataclass
class InequalityReport:
    theta: float
    z: float
    norm_used: str
    rows: list[tuple[float, float, float]]  # (energy gap, grad norm, ratio)
    min_margin: float
    min_ratio: float

    def to_json_dict(self) -> dict:
        return {
            "theta": self.theta,
            "z": self.z,
            "norm_used": self.norm_used,
            "min_margin": self.min_margin,
            "min_ratio": self.min_ratio,
            "sample_count": len(self.rows),
        }


def gradient_family_norm(f: MapField, k: int, p: float) -> float:
    """|M(f)| in the discrete W^{k-2,p} family: L^p for k = 2, the dual-norm
    stand-in for k = 1."""
    if k == 2:
        return lp_norm(f.mesh, tension(f).values, p)
    if k == 1:
        return gradient_dual_norm(f, p)
    raise UnsupportedOrder(f"gradient norm family implemented for k in (1, 2), got {k}")


def verify_inequality(
    samples: list[MapField],
    f_inf: MapField,
    theta: float,
    z: float,
    norm_used: str = "l2",
    k: int = 1,
    dual_p: float = 2.0,
) -> InequalityReport:
    """Per-sample table of |M(f)| versus Z |E(f) - E(f_inf)|^theta."""
    e_inf = energy(f_inf)
    rows = []
    for f in samples:
        gap = abs(energy(f) - e_inf)
        if norm_used == "l2":
            gn = l2_norm(f.mesh, tension(f).values)
        elif norm_used == "wk_minus_2_p":
            gn = gradient_family_norm(f, k, dual_p)
        else:
            raise ValueError(f"unknown norm_used {norm_used!r}")
        ratio = gn / gap**theta if gap > 0 else float("inf")
        rows.append((gap, gn, ratio))
    margins = [gn - z * gap**theta for gap, gn, _ in rows]
    finite = [r for _, _, r in rows if math.isfinite(r)]
    return InequalityReport(
        theta=theta,
        z=z,
        norm_used=norm_used,
        rows=rows,
        min_margin=min(margins) if margins else 0.0,
        min_ratio=min(finite) if finite else float("inf"),
    )


# ---------------------------------------------------------------------------
# exponent fitting

@dataclass
class LojasiewiczFit:
    theta_hat: float
    z_hat: float
    window: tuple[float, float]
    r_squared: float
    point_count: int
    norm_used: str

    def to_json_dict(self) -> dict:
        return {
            "theta_hat": self.theta_hat,
            "z_hat": self.z_hat,
            "window": list(self.window),
            "r_squared": self.r_squared,
            "point_count": self.point_count,
            "norm_used": self.norm_used,
        }


def default_window(e_inf: float, gaps: np.ndarray) -> tuple[float, float]:
    """[10 * energy floor, max gap / 10]; the floor is the resolution of E - E_inf."""
    floor = max(1e-12 * abs(e_inf), 1e-18)
    return (10.0 * floor, float(np.max(gaps)) / 10.0 if gaps.size else floor)


def _gap_grad_pairs(
    source: FlowTrace | list[MapField], f_inf: MapField
) -> tuple[np.ndarray, np.ndarray]:
    e_inf = energy(f_inf)
    if isinstance(source, FlowTrace):
        gaps = np.abs(source.energies() - e_inf)
        gns = source.grad_norms()
    else:
        gaps = np.array([abs(energy(f) - e_inf) for f in source])
        gns = np.array([l2_norm(f.mesh, tension(f).values) for f in source])
    return gaps, gns


def fit_exponent(
    source: FlowTrace | list[MapField],
    f_inf: MapField,
    window: tuple[float, float] | None = None,
    norm_used: str = "l2",
) -> LojasiewiczFit:
    """Least-squares slope of log|M| against log|E - E_inf| inside the window."""
    gaps, gns = _gap_grad_pairs(source, f_inf)
    if window is None:
        window = default_window(energy(f_inf), gaps)
    lo, hi = window
    if not (0 < lo < hi):
        raise DegenerateWindow(f"window {window} is empty or inverted")
    keep = (gaps >= lo) & (gaps <= hi) & (gns > 0)
    gaps, gns = gaps[keep], gns[keep]
    if gaps.size < 8:
        raise InsufficientDecades(f"only {gaps.size} points inside the window")
    span = math.log10(float(np.max(gaps)) / float(np.min(gaps)))
    if span < 2.0:
        raise InsufficientDecades(f"window spans {span:.2f} decades < 2")
    x = np.log(gaps)
    y = np.log(gns)
    slope, intercept = np.polyfit(x, y, 1)
    pred = slope * x + intercept
    ss_res = float(np.sum((y - pred) ** 2))
    ss_tot = float(np.sum((y - np.mean(y)) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    return LojasiewiczFit(
        theta_hat=float(slope),
        z_hat=float(np.exp(intercept)),
        window=(float(lo), float(hi)),
        r_squared=r2,
        point_count=int(gaps.size),
        norm_used=norm_used,
    )


# ---------------------------------------------------------------------------
# Morse-Bott detection

@dataclass
class MorseBottReport:
    kernel_dim: int
    expected_critical_dim: int | None
    gap_ratio: float
    verdict: str  # "morse_bott" | "degenerate" | "inconclusive"
    predicted_theta: float | None
    kernel_tol: float

    def to_json_dict(self) -> dict:
        return {
            "kernel_dim": self.kernel_dim,
            "expected_critical_dim": self.expected_critical_dim,
            "gap_ratio": self.gap_ratio,
            "verdict": self.verdict,
            "predicted_theta": self.predicted_theta,
            "kernel_tol": self.kernel_tol,
        }


def morse_bott_report(
    f_inf: MapField,
    expected_critical_dim: int | None,
    kernel_tol: float | None = None,
    grad_tol: float = 1e-9,
    n_modes: int = 32,
) -> MorseBottReport:
    """Hessian-kernel count at a critical point versus the expected dimension."""
    gn = l2_norm(f_inf.mesh, tension(f_inf).values)
    if gn > 10.0 * grad_tol:
        raise NotCritical(f"|M(f_inf)| = {gn:.3e} > 10 * {grad_tol:.1e}")
    op = hessian_matrix(f_inf)
    spec = hessian_spectrum(op, kernel_tol=kernel_tol, n_modes=n_modes)
    gap_ok = math.isfinite(spec.gap_ratio) and spec.gap_ratio >= 10.0
    if not gap_ok:
        verdict = "inconclusive"
    elif expected_critical_dim is None:
        verdict = "inconclusive"
    elif spec.kernel_dim == expected_critical_dim:
        verdict = "morse_bott"
    else:
        verdict = "degenerate"
    return MorseBottReport(
        kernel_dim=spec.kernel_dim,
        expected_critical_dim=expected_critical_dim,
        gap_ratio=spec.gap_ratio,
        verdict=verdict,
        predicted_theta=0.5 if verdict == "morse_bott" else None,
        kernel_tol=spec.kernel_tol,
    )


# ---------------------------------------------------------------------------
# convergence-rate classification

@dataclass
class ConvergenceVerdict:
    model: str  # "exponential" | "power_law" | "undetermined"
    rate: float | None      # |M| ~ exp(-rate t)
    exponent: float | None  # |M| ~ t^exponent
    r2_exponential: float
    r2_power_law: float

    def to_json_dict(self) -> dict:
        return {
            "model": self.model,
            "rate": self.rate,
            "exponent": self.exponent,
            "r2_exponential": self.r2_exponential,
            "r2_power_law": self.r2_power_law,
        }


def _r2_line(x: np.ndarray, y: np.ndarray) -> tuple[float, float]:
    slope, intercept = np.polyfit(x, y, 1)
    pred = slope * x + intercept
    ss_res = float(np.sum((y - pred) ** 2))
    ss_tot = float(np.sum((y - np.mean(y)) ** 2))
    return float(slope), (1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0)


def convergence_classifier(
    trace: FlowTrace, grad_cut: float = 1e-3, min_tail: int = 20
) -> ConvergenceVerdict:
    """Fit the trace tail as exponential versus power-law decay of |M|."""
    t = trace.times()
    gn = trace.grad_norms()
    keep = (gn < grad_cut) & (gn > 0) & (t > 0)
    t, gn = t[keep], gn[keep]
    if t.size < min_tail:
        raise InsufficientTail(f"only {t.size} tail samples below {grad_cut:.1e}")
    y = np.log(gn)
    slope_e, r2_e = _r2_line(t, y)
    slope_p, r2_p = _r2_line(np.log(t), y)
    if r2_e < 0.95 and r2_p < 0.95:
        return ConvergenceVerdict("undetermined", None, None, r2_e, r2_p)
    # exponential wins ties (expected in the Morse-Bott regime)
    if r2_e >= r2_p - 1e-3:
        return ConvergenceVerdict("exponential", -slope_e, None, r2_e, r2_p)
    return ConvergenceVerdict("power_law", None, slope_p, r2_e, r2_p)
