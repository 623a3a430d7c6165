"""Vertex-indexed maps into a target and tangent fields along them."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import NonTangentInput, OffTarget, ShapeMismatch
from .meshes import SourceMesh, mode_basis
from .targets import EmbeddedTarget

ON_TARGET_TOL = 1e-9
TANGENCY_TOL = 1e-8


@dataclass(eq=False)
class MapField:
    """Map f : M -> N stored as per-vertex ambient coordinates."""

    values: np.ndarray
    target: EmbeddedTarget
    mesh: SourceMesh

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != (self.mesh.vertex_count, self.target.ambient_dim):
            raise ShapeMismatch(
                f"map values {self.values.shape} != "
                f"({self.mesh.vertex_count}, {self.target.ambient_dim})"
            )
        worst = float(np.max(self.target.distance(self.values)))
        if worst > ON_TARGET_TOL:
            raise OffTarget(f"map leaves target by {worst:.3e} > {ON_TARGET_TOL:.1e}")

    def copy(self) -> "MapField":
        return MapField(self.values.copy(), self.target, self.mesh)


@dataclass(eq=False)
class TangentField:
    """Section u with u(x) in the tangent plane of N at f(x)."""

    values: np.ndarray
    base: MapField
    check: bool = field(default=True, repr=False)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != self.base.values.shape:
            raise ShapeMismatch(
                f"tangent values {self.values.shape} != base {self.base.values.shape}"
            )
        if self.check:
            P = self.base.target.tangent_projector(self.base.values, check=False)
            resid = np.einsum("vij,vj->vi", P, self.values) - self.values
            worst = float(np.max(np.linalg.norm(resid, axis=1)))
            scale = max(1.0, float(np.max(np.linalg.norm(self.values, axis=1))))
            if worst > TANGENCY_TOL * scale:
                raise NonTangentInput(
                    f"tangency residual {worst:.3e} > {TANGENCY_TOL * scale:.1e}"
                )

    def linf(self) -> float:
        return float(np.max(np.linalg.norm(self.values, axis=1)))


# ---------------------------------------------------------------------------
# constructors for the scenario initial maps

def constant_map(mesh: SourceMesh, target: EmbeddedTarget, point=None) -> MapField:
    """Constant map at the projection of ``point`` (default: the target's base point)."""
    if point is None:
        point = target.base_point()
    y = target.project_to_target(np.asarray(point, dtype=float))
    return MapField(np.tile(y, (mesh.vertex_count, 1)), target, mesh)


def identity_sphere_map(mesh: SourceMesh, target: EmbeddedTarget) -> MapField:
    """Identity S^2 -> S^2 on an icosphere mesh."""
    if mesh.kind != "icosphere" or target.spec() != {"kind": "sphere", "ambient_dim": 3}:
        raise ShapeMismatch("identity map needs an icosphere mesh and S^2 target")
    return MapField(mesh.points.copy(), target, mesh)


def degree_circle_map(mesh: SourceMesh, target: EmbeddedTarget, k: int) -> MapField:
    """Degree-k map of the circle, theta -> (cos k theta, sin k theta)."""
    if mesh.kind != "circle" or target.spec() != {"kind": "sphere", "ambient_dim": 2}:
        raise ShapeMismatch("degree map needs a circle mesh and S^1 target")
    t = mesh.points[:, 0]
    return MapField(np.stack([np.cos(k * t), np.sin(k * t)], axis=1), target, mesh)


def random_tangent_field(
    f: MapField, rng: np.random.Generator, amplitude: float = 1.0
) -> TangentField:
    """Band-limited ambient field projected to the tangent planes along f."""
    basis = mode_basis(f.mesh)
    raw = basis @ rng.standard_normal((basis.shape[1], f.target.ambient_dim))
    P = f.target.tangent_projector(f.values, check=False)
    return TangentField(amplitude * np.einsum("vij,vj->vi", P, raw), f)


def perturbed_constant_map(
    mesh: SourceMesh,
    target: EmbeddedTarget,
    amplitude: float,
    rng: np.random.Generator,
    point=None,
) -> MapField:
    """Constant map pushed off by a random tangent field of given sup amplitude."""
    f0 = constant_map(mesh, target, point)
    u = random_tangent_field(f0, rng)
    sup = u.linf()
    scale = amplitude / sup if sup > 0 else 0.0
    return MapField(
        target.project_to_target(f0.values + scale * u.values), target, mesh
    )


def map_sup_distance(f: MapField, g: MapField) -> float:
    return float(np.max(np.linalg.norm(f.values - g.values, axis=1)))
