"""Scene geometry: OBJ mesh ingestion, voxelization, placement sampling.

Meshes come in as triangle soups with per-group text labels.  The voxelizer
produces the closed solid/air grid the wave solver runs on, with a boundary
admittance attached to every air cell that touches a solid cell.  Placement
sampling yields the collision-free source/receiver lattice.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

DEGENERATE_AREA = 1e-12

# Padding shell around the mesh bbox so the voxel domain is closed.
SHELL_CELLS = 1

_FACE_OFFSETS = np.array(
    [[1, 0, 0], [-1, 0, 0], [0, 1, 0], [0, -1, 0], [0, 0, 1], [0, 0, -1]],
    dtype=np.int64,
)


class SceneError(ValueError):
    pass


# ---------------------------------------------------------------------------
# Triangle mesh
# ---------------------------------------------------------------------------


@dataclass
class TriangleMesh:
    """Triangle soup with per-triangle material indices and group labels.

    ``object_labels`` holds the distinct group label strings; ``triangle_group``
    maps each triangle to its label.  ``triangle_material`` indexes a material
    table (-1 while unassigned).
    """

    vertices: np.ndarray
    triangles: np.ndarray
    triangle_material: np.ndarray | None = None
    object_labels: tuple[str, ...] = ()
    triangle_group: np.ndarray | None = None
    degenerate_dropped: int = 0

    def __post_init__(self) -> None:
        self.vertices = np.asarray(self.vertices, dtype=np.float64).reshape(-1, 3)
        self.triangles = np.asarray(self.triangles, dtype=np.int64).reshape(-1, 3)
        if self.triangles.size == 0:
            raise SceneError("mesh has no triangles")
        if self.triangles.min() < 0 or self.triangles.max() >= len(self.vertices):
            raise SceneError(
                f"face index out of range (vertex count {len(self.vertices)})"
            )
        if self.triangle_material is None:
            self.triangle_material = np.full(len(self.triangles), -1, dtype=np.int64)
        else:
            self.triangle_material = np.asarray(self.triangle_material, dtype=np.int64)
            if self.triangle_material.shape != (len(self.triangles),):
                raise SceneError("triangle_material must have one entry per triangle")
        if self.triangle_group is None:
            self.triangle_group = np.zeros(len(self.triangles), dtype=np.int64)
            if not self.object_labels:
                self.object_labels = ("",)
        else:
            self.triangle_group = np.asarray(self.triangle_group, dtype=np.int64)
            if self.triangle_group.shape != (len(self.triangles),):
                raise SceneError("triangle_group must have one entry per triangle")
            if self.triangle_group.min() < 0 or self.triangle_group.max() >= len(
                self.object_labels
            ):
                raise SceneError("triangle_group indexes outside object_labels")
        areas = self.triangle_areas()
        if np.any(areas <= DEGENERATE_AREA):
            raise SceneError("mesh contains degenerate (zero-area) triangles")
        lo, hi = self.bounds()
        if np.any(hi - lo <= 0):
            raise SceneError(f"mesh bounding box is flat: extents {hi - lo}")

    def bounds(self) -> tuple[np.ndarray, np.ndarray]:
        used = self.vertices[np.unique(self.triangles)]
        return used.min(axis=0), used.max(axis=0)

    def triangle_vertices(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        v = self.vertices
        t = self.triangles
        return v[t[:, 0]], v[t[:, 1]], v[t[:, 2]]

    def triangle_areas(self) -> np.ndarray:
        a, b, c = self.triangle_vertices()
        return 0.5 * np.linalg.norm(np.cross(b - a, c - a), axis=1)

    def surface_area(self) -> float:
        return float(self.triangle_areas().sum())

    def volume(self) -> float:
        """Enclosed volume by the divergence theorem (requires a closed mesh)."""
        a, b, c = self.triangle_vertices()
        return float(abs(np.einsum("ij,ij->i", a, np.cross(b, c)).sum()) / 6.0)

    def is_closed(self) -> bool:
        """True when every undirected edge is shared by exactly two triangles."""
        t = self.triangles
        edges = np.concatenate([t[:, [0, 1]], t[:, [1, 2]], t[:, [2, 0]]])
        edges = np.sort(edges, axis=1)
        _, counts = np.unique(edges, axis=0, return_counts=True)
        return bool(np.all(counts == 2))


def load_mesh(path: str | Path) -> TriangleMesh:
    """Load a Wavefront-OBJ style mesh (v/f/g/o/usemtl lines).

    Non-triangular faces are fan-triangulated; group and material names become
    object labels; zero-area triangles are dropped and counted in
    ``degenerate_dropped``.
    """
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise SceneError(f"cannot read mesh file {path}: {exc}") from exc

    vertices: list[tuple[float, float, float]] = []
    triangles: list[tuple[int, int, int]] = []
    labels: list[str] = []
    label_index: dict[str, int] = {}
    tri_group: list[int] = []
    current = _intern_label(labels, label_index, "")

    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        tag = parts[0]
        if tag == "v":
            if len(parts) < 4:
                raise SceneError(f"{path}:{lineno}: malformed vertex line")
            vertices.append((float(parts[1]), float(parts[2]), float(parts[3])))
        elif tag in ("g", "o", "usemtl"):
            current = _intern_label(labels, label_index, " ".join(parts[1:]).strip())
        elif tag == "f":
            idx = [_parse_face_index(p, len(vertices), path, lineno) for p in parts[1:]]
            if len(idx) < 3:
                raise SceneError(f"{path}:{lineno}: face needs at least 3 vertices")
            for k in range(1, len(idx) - 1):
                triangles.append((idx[0], idx[k], idx[k + 1]))
                tri_group.append(current)
        # other directives (vn, vt, mtllib, s, ...) are ignored

    if not triangles:
        raise SceneError(f"{path}: no faces found")

    verts = np.asarray(vertices, dtype=np.float64)
    tris = np.asarray(triangles, dtype=np.int64)
    groups = np.asarray(tri_group, dtype=np.int64)
    a, b, c = verts[tris[:, 0]], verts[tris[:, 1]], verts[tris[:, 2]]
    areas = 0.5 * np.linalg.norm(np.cross(b - a, c - a), axis=1)
    keep = areas > DEGENERATE_AREA
    dropped = int(np.count_nonzero(~keep))
    if not np.any(keep):
        raise SceneError(f"{path}: only degenerate geometry found")
    return TriangleMesh(
        vertices=verts,
        triangles=tris[keep],
        object_labels=tuple(labels),
        triangle_group=groups[keep],
        degenerate_dropped=dropped,
    )


def _intern_label(labels: list[str], index: dict[str, int], name: str) -> int:
    if name not in index:
        index[name] = len(labels)
        labels.append(name)
    return index[name]


def _parse_face_index(token: str, n_vertices: int, path: Path, lineno: int) -> int:
    head = token.split("/")[0]
    try:
        value = int(head)
    except ValueError as exc:
        raise SceneError(f"{path}:{lineno}: bad face index {token!r}") from exc
    idx = value - 1 if value > 0 else n_vertices + value
    if not 0 <= idx < n_vertices:
        raise SceneError(
            f"{path}:{lineno}: face index {value} out of range (have {n_vertices} vertices)"
        )
    return idx


# ---------------------------------------------------------------------------
# Voxel grid
# ---------------------------------------------------------------------------

CELL_AIR = 0
CELL_SOLID = 1


@dataclass
class VoxelGrid:
    """Axis-aligned voxelization with boundary admittance on air cells.

    ``admittance`` is nonzero only for air cells adjacent to at least one solid
    cell; ``cell_material`` carries the material of the triangle nearest each
    solid cell (-1 for the closing shell and material-less meshes).
    """

    origin: np.ndarray
    dx: float
    cell_state: np.ndarray
    admittance: np.ndarray
    cell_material: np.ndarray

    def __post_init__(self) -> None:
        self.origin = np.asarray(self.origin, dtype=np.float64).reshape(3)
        self.cell_state = np.asarray(self.cell_state, dtype=np.uint8)
        if self.dx <= 0:
            raise SceneError(f"voxel spacing must be positive, got {self.dx}")
        if self.cell_state.ndim != 3 or min(self.cell_state.shape) < 3:
            raise SceneError(f"grid dims must all be >= 3, got {self.cell_state.shape}")
        if self.admittance.shape != self.cell_state.shape:
            raise SceneError("admittance array must match grid dims")
        if self.cell_material.shape != self.cell_state.shape:
            raise SceneError("cell_material array must match grid dims")
        if np.any(self.admittance < 0):
            raise SceneError("boundary admittance must be >= 0")

    @property
    def dims(self) -> tuple[int, int, int]:
        return self.cell_state.shape  # type: ignore[return-value]

    def cell_center(self, idx) -> np.ndarray:
        return self.origin + (np.asarray(idx, dtype=np.float64) + 0.5) * self.dx

    def point_to_cell(self, point) -> tuple[int, int, int]:
        idx = np.floor((np.asarray(point, dtype=np.float64) - self.origin) / self.dx)
        idx = np.clip(idx, 0, np.asarray(self.dims) - 1).astype(int)
        return int(idx[0]), int(idx[1]), int(idx[2])

    def is_air(self, idx) -> bool:
        return self.cell_state[tuple(idx)] == CELL_AIR

    def air_fraction(self) -> float:
        return float(np.mean(self.cell_state == CELL_AIR))


def admittance_from_absorption(absorption) -> float:
    """Boundary admittance for the wave solver from an octave absorption spectrum.

    Uses the mean absorption over the 63-1000 Hz bands, clamped away from 0/1
    so the specific impedance stays finite.
    """
    alpha = float(np.mean(np.asarray(absorption, dtype=np.float64)[:5]))
    alpha = min(max(alpha, 0.001), 0.999)
    reflectance = np.sqrt(1.0 - alpha)
    xi = (1.0 + reflectance) / (1.0 - reflectance)
    return 1.0 / xi


def voxelize(
    mesh: TriangleMesh,
    dx: float,
    materials=None,
    *,
    memory_cap_bytes: int = 4 * 1024**3,
) -> VoxelGrid:
    """Conservative surface voxelization on a closed, shell-padded grid.

    A cell is solid iff any triangle intersects its cube (separating-axis
    test); air cells next to solid cells receive the admittance of the
    adjacent material.  ``materials`` is an optional sequence indexed by
    ``mesh.triangle_material`` whose items expose ``.absorption``.
    """
    lo, hi = mesh.bounds()
    extent = hi - lo
    if dx <= 0:
        raise SceneError(f"dx must be positive, got {dx}")
    if dx >= extent.min() / 3:
        raise SceneError(
            f"dx={dx} too coarse for bbox extents {extent} (need dx < min extent / 3)"
        )

    inner = np.ceil(extent / dx - 1e-9).astype(int)
    dims = inner + 2 * SHELL_CELLS
    origin = lo - SHELL_CELLS * dx

    needed = int(dims.prod()) * (1 + 8 + 8)  # state + admittance + material
    if needed > memory_cap_bytes:
        raise SceneError(
            f"voxel grid needs {needed} bytes, above cap {memory_cap_bytes}"
        )

    state = np.zeros(dims, dtype=np.uint8)
    material = np.full(dims, -1, dtype=np.int64)
    tri_dist = np.full(dims, np.inf, dtype=np.float64)

    # closing shell
    for axis in range(3):
        sl: list = [slice(None)] * 3
        sl[axis] = slice(0, SHELL_CELLS)
        state[tuple(sl)] = CELL_SOLID
        sl[axis] = slice(dims[axis] - SHELL_CELLS, dims[axis])
        state[tuple(sl)] = CELL_SOLID

    v0, v1, v2 = mesh.triangle_vertices()
    half = dx / 2.0
    for t in range(len(mesh.triangles)):
        tri = np.stack([v0[t], v1[t], v2[t]])
        tmin = tri.min(axis=0) - 1e-9
        tmax = tri.max(axis=0) + 1e-9
        c0 = np.maximum(np.floor((tmin - origin) / dx).astype(int), 0)
        c1 = np.minimum(np.floor((tmax - origin) / dx).astype(int), dims - 1)
        ii, jj, kk = np.meshgrid(
            np.arange(c0[0], c1[0] + 1),
            np.arange(c0[1], c1[1] + 1),
            np.arange(c0[2], c1[2] + 1),
            indexing="ij",
        )
        cells = np.stack([ii.ravel(), jj.ravel(), kk.ravel()], axis=1)
        if cells.size == 0:
            continue
        centers = origin + (cells + 0.5) * dx
        hitmask = _triangle_boxes_overlap(tri, centers, half)
        hits = cells[hitmask]
        if hits.size == 0:
            continue
        flat = np.ravel_multi_index((hits[:, 0], hits[:, 1], hits[:, 2]), tuple(dims))
        state.flat[flat] = CELL_SOLID
        d = _point_triangle_distance(centers[hitmask], tri[0], tri[1], tri[2])
        closer = d < tri_dist.flat[flat]
        material.flat[flat[closer]] = mesh.triangle_material[t]
        tri_dist.flat[flat[closer]] = d[closer]

    admittance = np.zeros(dims, dtype=np.float64)
    if materials is not None:
        beta_table = np.array(
            [admittance_from_absorption(m.absorption) for m in materials]
        )
        _assign_boundary_admittance(state, material, beta_table, admittance)
    return VoxelGrid(
        origin=origin,
        dx=dx,
        cell_state=state,
        admittance=admittance,
        cell_material=material,
    )


def _assign_boundary_admittance(state, material, beta_table, admittance) -> None:
    """Average the admittance of adjacent solid-cell materials onto air cells."""
    solid = state == CELL_SOLID
    beta_cell = np.zeros(state.shape)
    has_mat = material >= 0
    beta_cell[has_mat] = beta_table[material[has_mat]]
    total = np.zeros(state.shape)
    count = np.zeros(state.shape)
    for off in _FACE_OFFSETS:
        shifted_solid = _shift(solid, off, fill=False)
        shifted_beta = _shift(np.where(solid & has_mat, beta_cell, 0.0), off, fill=0.0)
        shifted_counts = _shift((solid & has_mat).astype(float), off, fill=0.0)
        total += shifted_beta
        count += shifted_counts
        del shifted_solid
    air = state == CELL_AIR
    touched = air & (count > 0)
    admittance[touched] = total[touched] / count[touched]


def _shift(arr: np.ndarray, off, fill):
    out = np.full_like(arr, fill)
    src = [slice(None)] * 3
    dst = [slice(None)] * 3
    for axis, o in enumerate(off):
        if o > 0:
            src[axis] = slice(0, arr.shape[axis] - o)
            dst[axis] = slice(o, arr.shape[axis])
        elif o < 0:
            src[axis] = slice(-o, arr.shape[axis])
            dst[axis] = slice(0, arr.shape[axis] + o)
    out[tuple(dst)] = arr[tuple(src)]
    return out


def _triangle_boxes_overlap(tri: np.ndarray, centers: np.ndarray, half: float) -> np.ndarray:
    """Separating-axis triangle vs axis-aligned cube test, vectorized over boxes.

    ``tri`` is (3, 3); ``centers`` is (N, 3); all cubes share half-extent
    ``half``.  Touching counts as overlap (conservative).
    """
    a = tri[0] - centers
    b = tri[1] - centers
    c = tri[2] - centers

    # box axes
    lo = np.minimum(np.minimum(a, b), c)
    hi = np.maximum(np.maximum(a, b), c)
    ok = np.all((lo <= half) & (hi >= -half), axis=1)
    if not np.any(ok):
        return ok

    edges = (tri[1] - tri[0], tri[2] - tri[1], tri[0] - tri[2])
    normal = np.cross(edges[0], edges[1])
    axes = [normal]
    for e in edges:
        axes.append(np.array([0.0, -e[2], e[1]]))  # cross with x
        axes.append(np.array([e[2], 0.0, -e[0]]))  # cross with y
        axes.append(np.array([-e[1], e[0], 0.0]))  # cross with z
    for axis in axes:
        r = half * np.abs(axis).sum()
        pa = a @ axis
        pb = b @ axis
        pc = c @ axis
        pmin = np.minimum(np.minimum(pa, pb), pc)
        pmax = np.maximum(np.maximum(pa, pb), pc)
        ok &= (pmin <= r) & (pmax >= -r)
        if not np.any(ok):
            break
    return ok


def dump_voxels(grid: VoxelGrid, path: str | Path) -> None:
    """Flat binary dump: dims (3 x int32 LE), dx (float64 LE), origin
    (3 x float64 LE), then one state byte per cell in C order."""
    header = struct.pack(
        "<3i d 3d",
        *[int(d) for d in grid.dims],
        float(grid.dx),
        *[float(o) for o in grid.origin],
    )
    Path(path).write_bytes(header + grid.cell_state.tobytes(order="C"))


def load_voxel_dump(path: str | Path) -> VoxelGrid:
    raw = Path(path).read_bytes()
    head = struct.calcsize("<3i d 3d")
    nx, ny, nz, dx, ox, oy, oz = struct.unpack("<3i d 3d", raw[:head])
    state = np.frombuffer(raw[head:], dtype=np.uint8).reshape(nx, ny, nz).copy()
    return VoxelGrid(
        origin=np.array([ox, oy, oz]),
        dx=dx,
        cell_state=state,
        admittance=np.zeros((nx, ny, nz)),
        cell_material=np.full((nx, ny, nz), -1, dtype=np.int64),
    )


# ---------------------------------------------------------------------------
# Placement sampling
# ---------------------------------------------------------------------------


@dataclass
class PlacementSet:
    """Collision-free source/receiver positions with ordered pairing."""

    sources: np.ndarray
    receivers: np.ndarray
    pairs: list[tuple[int, int]]
    clearance: float

    def __post_init__(self) -> None:
        self.sources = np.asarray(self.sources, dtype=np.float64).reshape(-1, 3)
        self.receivers = np.asarray(self.receivers, dtype=np.float64).reshape(-1, 3)
        for s, r in self.pairs:
            if not (0 <= s < len(self.sources) and 0 <= r < len(self.receivers)):
                raise SceneError(f"pair ({s}, {r}) indexes outside placement lists")


def min_distance_to_mesh(points: np.ndarray, mesh: TriangleMesh) -> np.ndarray:
    """Exact minimum point-to-triangle distance for each query point."""
    points = np.atleast_2d(np.asarray(points, dtype=np.float64))
    v0, v1, v2 = mesh.triangle_vertices()
    best = np.full(len(points), np.inf)
    for t in range(len(mesh.triangles)):
        d = _point_triangle_distance(points, v0[t], v1[t], v2[t])
        np.minimum(best, d, out=best)
    return best


def _point_triangle_distance(p: np.ndarray, a, b, c) -> np.ndarray:
    """Distance from points (N, 3) to one triangle, via barycentric clamping."""
    p = np.atleast_2d(p)
    ab = b - a
    ac = c - a
    ap = p - a

    d1 = ap @ ab
    d2 = ap @ ac
    bp = p - b
    d3 = bp @ ab
    d4 = bp @ ac
    cp = p - c
    d5 = cp @ ab
    d6 = cp @ ac

    closest = np.empty_like(p)
    done = np.zeros(len(p), dtype=bool)

    mask = (d1 <= 0) & (d2 <= 0)  # vertex a
    closest[mask] = a
    done |= mask

    mask = (~done) & (d3 >= 0) & (d4 <= d3)  # vertex b
    closest[mask] = b
    done |= mask

    mask = (~done) & (d6 >= 0) & (d5 <= d6)  # vertex c
    closest[mask] = c
    done |= mask

    vc = d1 * d4 - d3 * d2
    mask = (~done) & (vc <= 0) & (d1 >= 0) & (d3 <= 0)  # edge ab
    denom = np.where(d1 - d3 == 0, 1.0, d1 - d3)
    t_ab = np.clip(d1 / denom, 0.0, 1.0)
    closest[mask] = a + np.outer(t_ab[mask], ab)
    done |= mask

    vb = d5 * d2 - d1 * d6
    mask = (~done) & (vb <= 0) & (d2 >= 0) & (d6 <= 0)  # edge ac
    denom = np.where(d2 - d6 == 0, 1.0, d2 - d6)
    t_ac = np.clip(d2 / denom, 0.0, 1.0)
    closest[mask] = a + np.outer(t_ac[mask], ac)
    done |= mask

    va = d3 * d6 - d5 * d4
    mask = (~done) & (va <= 0) & (d4 - d3 >= 0) & (d5 - d6 >= 0)  # edge bc
    denom = (d4 - d3) + (d5 - d6)
    denom = np.where(denom == 0, 1.0, denom)
    t_bc = np.clip((d4 - d3) / denom, 0.0, 1.0)
    closest[mask] = b + np.outer(t_bc[mask], c - b)
    done |= mask

    # interior: project onto triangle plane
    inside = ~done
    if np.any(inside):
        denom_f = va + vb + vc
        denom_f = np.where(denom_f == 0, 1.0, denom_f)
        v = vb / denom_f
        w = vc / denom_f
        closest[inside] = (
            a + np.outer(v[inside], ab) + np.outer(w[inside], ac)
        )
    return np.linalg.norm(p - closest, axis=1)


# Near-axis ray directions for the parity test.  The small fixed tilt keeps
# rays off triangle edges and diagonals of axis-aligned geometry.
_PARITY_DIRECTIONS = np.array(
    [
        [1.0, 2.39e-4, 1.31e-4],
        [1.57e-4, 1.0, 2.71e-4],
        [3.14e-4, 1.73e-4, 1.0],
    ]
)


def points_inside_mesh(points: np.ndarray, mesh: TriangleMesh) -> np.ndarray:
    """Ray-parity inside test: 3 near-axis rays per point, majority vote."""
    points = np.atleast_2d(np.asarray(points, dtype=np.float64))
    v0, v1, v2 = mesh.triangle_vertices()
    votes = np.zeros(len(points), dtype=np.int64)
    for direction in _PARITY_DIRECTIONS:
        direction = direction / np.linalg.norm(direction)
        crossings = np.zeros(len(points), dtype=np.int64)
        for t in range(len(mesh.triangles)):
            hit = _ray_hits_triangle(points, direction, v0[t], v1[t], v2[t])
            crossings += hit
        votes += crossings % 2
    return votes >= 2


def _ray_hits_triangle(origins, direction, a, b, c, t_max=np.inf) -> np.ndarray:
    """Moller-Trumbore for a shared direction over many origins."""
    eps = 1e-12
    e1 = b - a
    e2 = c - a
    h = np.cross(direction, e2)
    det = e1 @ h
    if abs(det) < eps:
        return np.zeros(len(origins), dtype=bool)
    inv = 1.0 / det
    s = origins - a
    u = (s @ h) * inv
    q = np.cross(s, e1)
    v = (q @ direction) * inv
    t = (q @ e2) * inv
    return (u >= 0) & (u <= 1) & (v >= 0) & (u + v <= 1) & (t > 1e-9) & (t < t_max)


def segment_occluded(p0: np.ndarray, p1: np.ndarray, mesh: TriangleMesh) -> bool:
    """True when any triangle blocks the open segment p0 -> p1."""
    p0 = np.asarray(p0, dtype=np.float64)
    p1 = np.asarray(p1, dtype=np.float64)
    d = p1 - p0
    dist = np.linalg.norm(d)
    if dist < 1e-12:
        return False
    direction = d / dist
    v0, v1, v2 = mesh.triangle_vertices()
    origins = p0[None, :]
    for t in range(len(mesh.triangles)):
        if _ray_hits_triangle(origins, direction, v0[t], v1[t], v2[t], t_max=dist - 1e-9)[0]:
            return True
    return False


def sample_placements(
    mesh: TriangleMesh, grid_spacing: float, clearance: float
) -> PlacementSet:
    """Sample the interior lattice and keep collision-free points.

    Lattice points sit at bbox-min + k * grid_spacing (k >= 1), strictly inside
    the bounding box.  A point survives when it lies inside the enclosed air
    region and its distance to every triangle is at least ``clearance``.  The
    kept points serve as both sources and receivers; all ordered pairs with
    distinct indices are emitted.
    """
    if grid_spacing <= 0:
        raise SceneError(f"grid_spacing must be positive, got {grid_spacing}")
    if clearance < 0:
        raise SceneError(f"clearance must be >= 0, got {clearance}")
    lo, hi = mesh.bounds()
    axes = []
    for axis in range(3):
        coords = np.arange(lo[axis] + grid_spacing, hi[axis] - 1e-9, grid_spacing)
        axes.append(coords)
    if any(len(a) == 0 for a in axes):
        raise SceneError("no lattice points fit inside the scene bounding box")
    xx, yy, zz = np.meshgrid(*axes, indexing="ij")
    candidates = np.stack([xx.ravel(), yy.ravel(), zz.ravel()], axis=1)

    inside = points_inside_mesh(candidates, mesh)
    candidates = candidates[inside]
    if len(candidates):
        far_enough = min_distance_to_mesh(candidates, mesh) >= clearance
        candidates = candidates[far_enough]
    if len(candidates) == 0:
        raise SceneError(
            "no valid placement points (scene too cluttered for the requested clearance)"
        )
    pairs = [
        (i, j)
        for i in range(len(candidates))
        for j in range(len(candidates))
        if i != j
    ]
    return PlacementSet(
        sources=candidates, receivers=candidates.copy(), pairs=pairs, clearance=clearance
    )
