"""Coordinate charts on the space of maps: u -> pi(f + u) and its inverse."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ChartRadiusExceeded, NewtonDivergence
from .fields import MapField, TangentField, map_sup_distance, random_tangent_field
from .meshes import sobolev_norm
from .rng import stream
from .targets import CHART_SAFETY
from .energy import tangent_frames

__all__ = ["chart_push", "chart_pull", "bilipschitz_estimate", "ChartReport"]

NEWTON_TOL = 1e-12
NEWTON_MAX_ITER = 50
PULL_RESIDUAL_TOL = 1e-10


def _chart_radius(f: MapField) -> float:
    return f.target.tubular_radius() * CHART_SAFETY


def chart_push(f: MapField, u: TangentField) -> MapField:
    """Phi_f(u) = pi(f + u), vertexwise."""
    if u.linf() >= _chart_radius(f):
        raise ChartRadiusExceeded(
            f"|u|_inf = {u.linf():.3e} >= {_chart_radius(f):.3e}"
        )
    pushed = f.target.project_to_target(f.values + u.values)
    return MapField(pushed, f.target, f.mesh)


def chart_pull(
    f: MapField, f1: MapField, max_iter: int = NEWTON_MAX_ITER
) -> TangentField:
    """Tangent u with pi(f + u) = f1, by damped per-vertex Newton iteration.

    The unknown is expressed in the orthonormal tangent frame at f; steps are
    halved whenever the vertex residual grows.  Uniqueness inside the safe
    chart radius follows from the local diffeomorphism property.
    """
    if map_sup_distance(f, f1) >= _chart_radius(f):
        raise ChartRadiusExceeded("maps too far apart to share a chart")
    tgt = f.target
    frames = tangent_frames(tgt, f.values)  # (V, n, dN)
    c = np.einsum("vnj,vn->vj", frames, f1.values - f.values)

    def residual(coef: np.ndarray) -> np.ndarray:
        pushed = tgt.project_to_target(
            f.values + np.einsum("vnj,vj->vn", frames, coef)
        )
        return pushed - f1.values

    r = residual(c)
    rnorm = np.linalg.norm(r, axis=1)
    for _ in range(max_iter):
        if np.max(rnorm) <= NEWTON_TOL:
            break
        y = tgt.project_to_target(f.values + np.einsum("vnj,vj->vn", frames, c))
        P = tgt.tangent_projector(y, check=False)
        J = np.einsum("vni,vij->vnj", P.transpose(0, 2, 1), frames)  # dpi(y) E
        JtJ = np.einsum("vnj,vnk->vjk", J, J)
        Jtr = np.einsum("vnj,vn->vj", J, r)
        try:
            step = np.linalg.solve(JtJ, Jtr[:, :, None])[:, :, 0]
        except np.linalg.LinAlgError as exc:
            raise NewtonDivergence(f"singular chart Jacobian: {exc}") from exc
        # damped update: halve per-vertex until the residual stops growing
        alpha = np.ones(c.shape[0])
        for _ in range(30):
            trial = c - alpha[:, None] * step
            r_new = residual(trial)
            rn_new = np.linalg.norm(r_new, axis=1)
            worse = rn_new > rnorm
            if not np.any(worse):
                break
            alpha[worse] *= 0.5
        c = c - alpha[:, None] * step
        r = residual(c)
        rnorm = np.linalg.norm(r, axis=1)
    if np.max(rnorm) > PULL_RESIDUAL_TOL:
        raise NewtonDivergence(
            f"chart inverse residual {float(np.max(rnorm)):.3e} > "
            f"{PULL_RESIDUAL_TOL:.1e}"
        )
    u = np.einsum("vnj,vj->vn", frames, c)
    return TangentField(u, f)


@dataclass
class ChartReport:
    c4_estimate: float
    max_roundtrip_error: float
    sample_count: int
    radius_used: float

    def to_json_dict(self) -> dict:
        return {
            "c4_estimate": self.c4_estimate,
            "max_roundtrip_error": self.max_roundtrip_error,
            "sample_count": self.sample_count,
            "radius_used": self.radius_used,
        }


def bilipschitz_estimate(
    f: MapField,
    radius: float,
    samples: int,
    norm: tuple[int, float] = (1, 2.0),
    seed: int = 0,
) -> ChartReport:
    """Empirical two-sided chart constant over seeded random tangent fields.

    For each sample, compares |u|_{W^{k,p}} with |f - Phi_f(u)|_{W^{k,p}};
    the estimate is max(max ratio, 1/min ratio) >= 1.
    """
    if radius >= _chart_radius(f):
        raise ChartRadiusExceeded(
            f"radius {radius:.3e} >= {_chart_radius(f):.3e}"
        )
    k, p = norm
    rng = stream(seed, "chart-bilipschitz")
    mesh = f.mesh
    max_ratio = 0.0
    min_ratio = np.inf
    max_rt = 0.0
    used = 0
    for _ in range(int(samples)):
        u = random_tangent_field(f, rng)
        n_u = sobolev_norm(mesh, u.values, k, p)
        if n_u == 0.0:
            continue
        u.values *= radius * rng.uniform(0.1, 1.0) / n_u
        if u.linf() >= _chart_radius(f):
            u.values *= 0.5 * _chart_radius(f) / u.linf()
        f1 = chart_push(f, u)
        n_u = sobolev_norm(mesh, u.values, k, p)
        n_d = sobolev_norm(mesh, f.values - f1.values, k, p)
        if n_d == 0.0:
            continue
        ratio = n_u / n_d
        max_ratio = max(max_ratio, ratio)
        min_ratio = min(min_ratio, ratio)
        back = chart_pull(f, f1)
        max_rt = max(max_rt, float(np.max(np.linalg.norm(back.values - u.values, axis=1))))
        used += 1
    c4 = max(max_ratio, 1.0 / min_ratio) if used else 1.0
    return ChartReport(
        c4_estimate=float(c4),
        max_roundtrip_error=float(max_rt),
        sample_count=used,
        radius_used=float(radius),
    )
