"""Discretized closed source manifolds.

A mesh carries a lumped mass vector ``area``, a stiffness matrix ``K`` and a
gradient-stencil matrix ``D`` with row-to-vertex scatter weights.  They are
built to satisfy, for every vertex function f,

    f^T K f  =  sum_rows |D f|^2  =  integral of |grad f|^2,

with K symmetric positive semidefinite and K 1 = 0 holding bitwise (diagonal
assembled as the negated off-diagonal row sum).  The Laplacian follows the
nonnegative convention Delta = -div grad, applied as (K f) / area.

Discretizations:
  * circle: uniform grid, five-point fourth-order stencil (the second-order
    chordal form is not accurate enough for the degree-ated energy checks);
    the matching gradient stencil is the spectral factorization of the
    stiffness symbol, a three-tap filter.
  * flat torus: uniform grid, standard five-point stencil, per-edge chords.
  * round sphere: icosphere with cotangent weights and barycentric areas,
    per-face affine-interpolant gradients.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .errors import InvalidExponents, InvalidSpec, ShapeMismatch, UnsupportedOrder
from .rng import stream

__all__ = [
    "SourceMesh",
    "build_source",
    "build_circle",
    "build_flat_torus",
    "build_icosphere",
    "laplace_beltrami_apply",
    "l2_inner",
    "lp_norm",
    "sobolev_norm",
    "energy_density",
    "mode_basis",
    "random_scalar_field",
    "random_ambient_field",
    "sobolev_multiplication_probe",
    "mesh_to_json_dict",
]


@dataclass(frozen=True, eq=False)
class SourceMesh:
    kind: str
    dimension: int
    refinement_level: int
    points: np.ndarray          # parameter/embedding coords per vertex
    area: np.ndarray            # lumped mass per vertex, (V,)
    stiffness: sp.csr_matrix    # K, symmetric PSD, K 1 = 0 bitwise
    diff: sp.csr_matrix         # D, (m, V) gradient stencil rows
    diff_scatter: sp.csr_matrix  # (V, m), row weights sum to 1 per row
    spec: dict = field(default_factory=dict)

    @property
    def vertex_count(self) -> int:
        return int(self.area.shape[0])

    @property
    def total_area(self) -> float:
        return float(np.sum(self.area))


# ---------------------------------------------------------------------------
# builders

def build_circle(n: int) -> SourceMesh:
    """Uniform n-vertex grid on the unit circle."""
    if n < 8:
        raise InvalidSpec("circle needs at least 8 vertices")
    n = int(n)
    h = 2.0 * math.pi / n
    theta = h * np.arange(n)
    area = np.full(n, h)

    # fourth-order stiffness: symbol (1-c)(7-c)/(3h) after mass pairing
    off1 = -4.0 / (3.0 * h)
    off2 = 1.0 / (12.0 * h)
    idx = np.arange(n)
    rows, cols, vals = [], [], []
    for shift, w in ((1, off1), (-1, off1), (2, off2), (-2, off2)):
        rows.append(idx)
        cols.append((idx + shift) % n)
        vals.append(np.full(n, w))
    diag = -(off1 + off1 + off2 + off2)  # bitwise-zero row sums
    rows.append(idx)
    cols.append(idx)
    vals.append(np.full(n, diag))
    K = sp.csr_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(n, n),
    )
    K = _zero_row_sums(K)

    # spectral factorization of the stencil: 3-tap filter g with |ghat|^2 = h*symbol
    alpha = math.sqrt((7.0 + math.sqrt(48.0)) / 2.0)
    beta = 1.0 / (2.0 * alpha)
    scale = 1.0 / math.sqrt(6.0 * h)
    taps = np.array([alpha, -(alpha + beta), beta]) * scale
    rows_d = np.repeat(idx, 3)
    cols_d = np.stack([idx, (idx + 1) % n, (idx + 2) % n], axis=1).ravel()
    vals_d = np.tile(taps, n)
    D = sp.csr_matrix((vals_d, (rows_d, cols_d)), shape=(n, n))
    # density for row i attributed to the stencil center i+1
    scatter = sp.csr_matrix(
        (np.ones(n), ((idx + 1) % n, idx)), shape=(n, n)
    )

    return SourceMesh(
        kind="circle",
        dimension=1,
        refinement_level=n,
        points=theta[:, None],
        area=area,
        stiffness=K,
        diff=D,
        diff_scatter=scatter,
        spec={"kind": "circle", "n": n},
    )


def build_flat_torus(nu: int, nv: int, lu: float = 2.0 * math.pi, lv: float = 2.0 * math.pi) -> SourceMesh:
    """Uniform nu x nv grid on a flat rectangular torus of side lengths lu, lv."""
    if nu < 8 or nv < 8:
        raise InvalidSpec("flat torus needs at least an 8 x 8 grid")
    if not (lu > 0 and lv > 0):
        raise InvalidSpec("flat torus needs positive side lengths")
    nu, nv = int(nu), int(nv)
    hu, hv = lu / nu, lv / nv
    V = nu * nv
    iu, iv = np.divmod(np.arange(V), nv)
    points = np.stack([iu * hu, iv * hv], axis=1)
    area = np.full(V, hu * hv)

    def vid(a, b):
        return (a % nu) * nv + (b % nv)

    wu, wv = hv / hu, hu / hv
    edges_i, edges_j, edges_w = [], [], []
    edges_i.append(np.arange(V))
    edges_j.append(vid(iu + 1, iv))
    edges_w.append(np.full(V, wu))
    edges_i.append(np.arange(V))
    edges_j.append(vid(iu, iv + 1))
    edges_w.append(np.full(V, wv))
    ei = np.concatenate(edges_i)
    ej = np.concatenate(edges_j)
    ew = np.concatenate(edges_w)

    K = _graph_stiffness(ei, ej, ew, V)
    D, scatter = _edge_diff(ei, ej, ew, V)

    return SourceMesh(
        kind="flat_torus",
        dimension=2,
        refinement_level=min(nu, nv),
        points=points,
        area=area,
        stiffness=K,
        diff=D,
        diff_scatter=scatter,
        spec={"kind": "flat_torus", "nu": nu, "nv": nv, "lu": lu, "lv": lv},
    )


def _graph_stiffness(ei, ej, ew, V) -> sp.csr_matrix:
    """Symmetric graph Laplacian with row sums forced to exact zero."""
    rows = np.concatenate([ei, ej])
    cols = np.concatenate([ej, ei])
    vals = np.concatenate([-ew, -ew])
    off = sp.csr_matrix((vals, (rows, cols)), shape=(V, V))
    off.sum_duplicates()
    diag = -np.asarray(off.sum(axis=1)).ravel()
    K = (off + sp.diags(diag)).tocsr()
    return _zero_row_sums(K)


def _zero_row_sums(K: sp.csr_matrix, sweeps: int = 3) -> sp.csr_matrix:
    """Fold any matvec-order rounding defect of K @ 1 back into the diagonal."""
    ones = np.ones(K.shape[0])
    for _ in range(sweeps):
        defect = K @ ones
        if not np.any(defect):
            break
        K = K - sp.diags(defect)
    return K.tocsr()

def _edge_diff(ei, ej, ew, V):
    """Per-edge rows sqrt(w) (f_j - f_i); density split half to each endpoint."""
    m = ei.shape[0]
    r = np.repeat(np.arange(m), 2)
    c = np.stack([ei, ej], axis=1).ravel()
    s = np.sqrt(ew)
    d = np.stack([-s, s], axis=1).ravel()
    D = sp.csr_matrix((d, (r, c)), shape=(m, V))
    sc_rows = np.concatenate([ei, ej])
    sc_cols = np.concatenate([np.arange(m), np.arange(m)])
    scatter = sp.csr_matrix(
        (np.full(2 * m, 0.5), (sc_rows, sc_cols)), shape=(V, m)
    )
    return D, scatter


def _icosahedron():
    phi = (1.0 + math.sqrt(5.0)) / 2.0
    verts = np.array(
        [
            (-1, phi, 0), (1, phi, 0), (-1, -phi, 0), (1, -phi, 0),
            (0, -1, phi), (0, 1, phi), (0, -1, -phi), (0, 1, -phi),
            (phi, 0, -1), (phi, 0, 1), (-phi, 0, -1), (-phi, 0, 1),
        ],
        dtype=float,
    )
    verts /= np.linalg.norm(verts, axis=1, keepdims=True)
    faces = np.array(
        [
            (0, 11, 5), (0, 5, 1), (0, 1, 7), (0, 7, 10), (0, 10, 11),
            (1, 5, 9), (5, 11, 4), (11, 10, 2), (10, 7, 6), (7, 1, 8),
            (3, 9, 4), (3, 4, 2), (3, 2, 6), (3, 6, 8), (3, 8, 9),
            (4, 9, 5), (2, 4, 11), (6, 2, 10), (8, 6, 7), (9, 8, 1),
        ],
        dtype=np.int64,
    )
    return verts, faces


def build_icosphere(level: int) -> SourceMesh:
    """Icosphere at the given subdivision level, unit radius."""
    if not (0 <= int(level) <= 7):
        raise InvalidSpec("icosphere level must be in 0..7")
    level = int(level)
    verts, faces = _icosahedron()
    vlist = [v for v in verts]
    for _ in range(level):
        midpoint: dict[tuple[int, int], int] = {}

        def mid(a: int, b: int) -> int:
            key = (a, b) if a < b else (b, a)
            if key not in midpoint:
                p = vlist[a] + vlist[b]
                vlist.append(p / np.linalg.norm(p))
                midpoint[key] = len(vlist) - 1
            return midpoint[key]

        new_faces = []
        for (a, b, c) in faces:
            ab, bc, ca = mid(a, b), mid(b, c), mid(c, a)
            new_faces.extend([(a, ab, ca), (b, bc, ab), (c, ca, bc), (ab, bc, ca)])
        faces = np.array(new_faces, dtype=np.int64)
    verts = np.array(vlist)
    V = verts.shape[0]
    F = faces.shape[0]

    p0, p1, p2 = verts[faces[:, 0]], verts[faces[:, 1]], verts[faces[:, 2]]
    e0, e1, e2 = p2 - p1, p0 - p2, p1 - p0  # edge opposite each corner
    normal = np.cross(e1, e2)
    double_area = np.linalg.norm(normal, axis=1)
    face_area = 0.5 * double_area
    nhat = normal / double_area[:, None]

    # cotangent edge weights: cot(angle at corner k) pairs with the opposite edge
    cot = np.empty((F, 3))
    for k, (u, v) in enumerate([(-e1, e2), (-e2, e0), (-e0, e1)]):
        cosv = np.sum(u * v, axis=1)
        sinv = np.linalg.norm(np.cross(u, v), axis=1)
        cot[:, k] = cosv / sinv
    ei = np.concatenate([faces[:, 1], faces[:, 2], faces[:, 0]])
    ej = np.concatenate([faces[:, 2], faces[:, 0], faces[:, 1]])
    ew = 0.5 * np.concatenate([cot[:, 0], cot[:, 1], cot[:, 2]])
    K = _graph_stiffness(ei, ej, ew, V)

    area = np.zeros(V)
    np.add.at(area, faces[:, 0], face_area / 3.0)
    np.add.at(area, faces[:, 1], face_area / 3.0)
    np.add.at(area, faces[:, 2], face_area / 3.0)

    # per-face affine gradient rows: grad phi_k = (nhat x e_k) / (2 A); three
    # Cartesian component rows per face, scaled by sqrt(A) so D^T D = K
    gphi = np.stack(
        [np.cross(nhat, e0), np.cross(nhat, e1), np.cross(nhat, e2)], axis=1
    ) / double_area[:, None, None]  # (F, corner, 3)
    rows, cols, vals = [], [], []
    for c_ax in range(3):
        base = np.arange(F) * 3 + c_ax
        for k in range(3):
            rows.append(base)
            cols.append(faces[:, k])
            vals.append(np.sqrt(face_area) * gphi[:, k, c_ax])
    D = sp.csr_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(3 * F, V),
    )
    sc_rows, sc_cols, sc_vals = [], [], []
    for c_ax in range(3):
        base = np.arange(F) * 3 + c_ax
        for k in range(3):
            sc_rows.append(faces[:, k])
            sc_cols.append(base)
            sc_vals.append(np.full(F, 1.0 / 3.0))
    scatter = sp.csr_matrix(
        (np.concatenate(sc_vals), (np.concatenate(sc_rows), np.concatenate(sc_cols))),
        shape=(V, 3 * F),
    )

    return SourceMesh(
        kind="icosphere",
        dimension=2,
        refinement_level=level,
        points=verts,
        area=area,
        stiffness=K,
        diff=D,
        diff_scatter=scatter,
        spec={"kind": "icosphere", "level": level},
    )


def build_source(spec: dict) -> SourceMesh:
    """Construct a mesh from a scenario-style spec dict."""
    kind = spec.get("kind")
    if kind == "circle":
        return build_circle(int(spec["n"]))
    if kind == "flat_torus":
        return build_flat_torus(
            int(spec["nu"]),
            int(spec["nv"]),
            float(spec.get("lu", 2.0 * math.pi)),
            float(spec.get("lv", 2.0 * math.pi)),
        )
    if kind == "icosphere":
        return build_icosphere(int(spec["level"]))
    raise InvalidSpec(f"unknown mesh kind {kind!r}")


# ---------------------------------------------------------------------------
# operators

def _check_field(mesh: SourceMesh, f: np.ndarray) -> np.ndarray:
    f = np.asarray(f, dtype=float)
    if f.shape[0] != mesh.vertex_count:
        raise ShapeMismatch(
            f"field has {f.shape[0]} vertices, mesh has {mesh.vertex_count}"
        )
    return f


def laplace_beltrami_apply(mesh: SourceMesh, f: np.ndarray) -> np.ndarray:
    """Componentwise Delta f = (K f) / area (nonnegative spectrum)."""
    f = _check_field(mesh, f)
    Kf = mesh.stiffness @ f
    return Kf / (mesh.area[:, None] if f.ndim > 1 else mesh.area)


def l2_inner(mesh: SourceMesh, u: np.ndarray, v: np.ndarray) -> float:
    """Mass-weighted inner product; components are summed pointwise."""
    u = _check_field(mesh, u)
    v = _check_field(mesh, v)
    if u.shape != v.shape:
        raise ShapeMismatch(f"shapes {u.shape} and {v.shape} differ")
    pointwise = u * v if u.ndim == 1 else np.sum(u * v, axis=1)
    return float(np.dot(mesh.area, pointwise))


def l2_norm(mesh: SourceMesh, u: np.ndarray) -> float:
    return math.sqrt(max(l2_inner(mesh, u, u), 0.0))


def _grad_magnitude(mesh: SourceMesh, comp: np.ndarray) -> np.ndarray:
    """Pointwise |grad f| for one scalar component."""
    df = mesh.diff @ comp
    return np.sqrt(np.maximum(mesh.diff_scatter @ (df * df) / mesh.area, 0.0))


def sobolev_norm(mesh: SourceMesh, f: np.ndarray, k: int, p: float) -> float:
    """Discrete W^{k,p} norm: (sum_j integral |grad^j f|^p)^(1/p).

    Components enter through p-th powers of their own derivative magnitudes.
    The second-order term uses |Delta f| as the derivative-magnitude proxy.
    """
    if k not in (0, 1, 2):
        raise UnsupportedOrder(f"sobolev order k={k} not supported (k <= 2)")
    if p < 1:
        raise InvalidExponents(f"p must be >= 1, got {p}")
    f = _check_field(mesh, f)
    comps = f[:, None] if f.ndim == 1 else f
    total = 0.0
    for c in range(comps.shape[1]):
        g = comps[:, c]
        total += float(np.dot(mesh.area, np.abs(g) ** p))
        if k >= 1:
            total += float(np.dot(mesh.area, _grad_magnitude(mesh, g) ** p))
        if k >= 2:
            lap = (mesh.stiffness @ g) / mesh.area
            total += float(np.dot(mesh.area, np.abs(lap) ** p))
    return total ** (1.0 / p)


def lp_norm(mesh: SourceMesh, f: np.ndarray, p: float) -> float:
    return sobolev_norm(mesh, f, 0, p)


def energy_density(mesh: SourceMesh, values: np.ndarray) -> np.ndarray:
    """Pointwise |df|^2; integrates against area to twice the energy."""
    values = _check_field(mesh, values)
    comps = values[:, None] if values.ndim == 1 else values
    dfs = mesh.diff @ comps
    row_sq = np.sum(dfs * dfs, axis=1)
    return (mesh.diff_scatter @ row_sq) / mesh.area


# ---------------------------------------------------------------------------
# band-limited fields

def mode_basis(mesh: SourceMesh) -> np.ndarray:
    """Eight low-frequency closed-form modes, unit L2 norm each.

    Closed forms (restrictions of the continuum eigenfunctions) are used so
    that the same test fields exist on every refinement level.
    """
    if mesh.kind == "circle":
        t = mesh.points[:, 0]
        cols = [np.ones_like(t)]
        cols += [f(k * t) for k in (1, 2, 3) for f in (np.cos, np.sin)]
        cols += [np.cos(4 * t)]
    elif mesh.kind == "flat_torus":
        lu, lv = mesh.spec["lu"], mesh.spec["lv"]
        u = 2.0 * math.pi * mesh.points[:, 0] / lu
        v = 2.0 * math.pi * mesh.points[:, 1] / lv
        cols = [
            np.ones_like(u),
            np.cos(u), np.sin(u), np.cos(v), np.sin(v),
            np.cos(u) * np.cos(v), np.cos(u) * np.sin(v), np.sin(u) * np.cos(v),
        ]
    elif mesh.kind == "icosphere":
        x, y, z = mesh.points.T
        cols = [np.ones_like(x), x, y, z, x * y, y * z, z * x, x * x - y * y]
    else:
        raise InvalidSpec(f"no mode basis for mesh kind {mesh.kind!r}")
    basis = np.stack(cols, axis=1)
    for j in range(basis.shape[1]):
        basis[:, j] /= l2_norm(mesh, basis[:, j])
    return basis


def random_scalar_field(mesh: SourceMesh, rng: np.random.Generator) -> np.ndarray:
    """Band-limited random scalar field with unit-variance mode coefficients."""
    basis = mode_basis(mesh)
    return basis @ rng.standard_normal(basis.shape[1])


def random_ambient_field(
    mesh: SourceMesh, rng: np.random.Generator, ambient_dim: int
) -> np.ndarray:
    basis = mode_basis(mesh)
    return basis @ rng.standard_normal((basis.shape[1], ambient_dim))


# ---------------------------------------------------------------------------
# multiplication probe

def sobolev_multiplication_probe(
    levels: list[int],
    k: int,
    p: float,
    trials: int,
    seed: int = 0,
    mesh_kind: str = "flat_torus",
) -> list[dict]:
    """Estimate the W^{k,p} x L2 -> L2 multiplication constant per level.

    Returns, for each refinement level, the max over seeded trials of
    ||f1 f2||_L2 / (||f1||_{W^{k,p}} ||f2||_L2).  Stability of these numbers
    under refinement is the property being probed; trials with f2 = 0 are
    excluded from the max.
    """
    d = 2 if mesh_kind in ("flat_torus", "icosphere") else 1
    first_order_ok = k == 1 and p > d
    higher_order_ok = k >= 2 and p >= 2 and k * p > d
    if not (first_order_ok or higher_order_ok):
        raise InvalidExponents(
            f"(k={k}, p={p}) inadmissible: need k >= 2, p >= 2, kp > d, "
            f"or k = 1 with p > d"
        )
    rng = stream(seed, "mult-probe")
    out = []
    for level in levels:
        if mesh_kind == "flat_torus":
            mesh = build_flat_torus(level, level)
        elif mesh_kind == "circle":
            mesh = build_circle(level)
        elif mesh_kind == "icosphere":
            mesh = build_icosphere(level)
        else:
            raise InvalidSpec(f"unknown mesh kind {mesh_kind!r}")
        best = 0.0
        for _ in range(int(trials)):
            f1 = random_scalar_field(mesh, rng)
            f2 = random_scalar_field(mesh, rng)
            denom2 = l2_norm(mesh, f2)
            if denom2 == 0.0:
                continue
            ratio = l2_norm(mesh, f1 * f2) / (sobolev_norm(mesh, f1, k, p) * denom2)
            best = max(best, ratio)
        out.append({"level": int(level), "max_ratio": best})
    return out


def mesh_to_json_dict(mesh: SourceMesh) -> dict:
    """Dump vertex coordinates, areas and stencil triplets (diagnostic export)."""
    K = mesh.stiffness.tocoo()
    return {
        "spec": mesh.spec,
        "points": mesh.points.tolist(),
        "areas": mesh.area.tolist(),
        "stiffness_triplets": [
            [int(i), int(j), float(v)] for i, j, v in zip(K.row, K.col, K.data)
        ],
    }
