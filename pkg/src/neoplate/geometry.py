"""Planar rectangles, triangle meshes, and 2x2 deformation-gradient kinematics.

Points are array-likes of shape (2,); 2x2 matrices are numpy arrays of
shape (2, 2) with rows [[a11, a12], [a21, a22]].
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# Boundary side tags carried per vertex.  A vertex may sit on several
# sides at once (corners), so flags are strings over the alphabet LRBT.
SIDE_LEFT = "L"
SIDE_RIGHT = "R"
SIDE_BOTTOM = "B"
SIDE_TOP = "T"

_INTERIOR_TOKEN = "-"  # file-format placeholder for an empty flag


@dataclass(frozen=True)
class Rect:
    """Axis-aligned open rectangle (xmin, xmax) x (ymin, ymax)."""

    xmin: float
    xmax: float
    ymin: float
    ymax: float

    def __post_init__(self):
        if not (self.xmin < self.xmax and self.ymin < self.ymax):
            raise ValueError(f"degenerate rectangle {self}")

    @property
    def width(self) -> float:
        return self.xmax - self.xmin

    @property
    def height(self) -> float:
        return self.ymax - self.ymin

    @property
    def area(self) -> float:
        return self.width * self.height

    @property
    def center(self) -> np.ndarray:
        return np.array([0.5 * (self.xmin + self.xmax),
                         0.5 * (self.ymin + self.ymax)])

    @property
    def diameter(self) -> float:
        return float(np.hypot(self.width, self.height))

    def contains(self, x, y, tol: float = 0.0) -> bool:
        return (self.xmin - tol <= x <= self.xmax + tol
                and self.ymin - tol <= y <= self.ymax + tol)


def unit_square() -> Rect:
    return Rect(0.0, 1.0, 0.0, 1.0)


class TriangleMesh:
    """Triangulation of a rectangle with per-vertex boundary-side flags.

    vertices: (nv, 2) float array
    triangles: (nt, 3) int array, counterclockwise
    boundary_flags: list of nv strings over 'LRBT' ('' for interior)
    """

    def __init__(self, vertices, triangles, boundary_flags, rect: Rect | None = None):
        self.vertices = np.asarray(vertices, dtype=float)
        self.triangles = np.asarray(triangles, dtype=int)
        self.boundary_flags = list(boundary_flags)
        self.rect = rect
        if self.vertices.ndim != 2 or self.vertices.shape[1] != 2:
            raise ValueError("vertices must be (nv, 2)")
        if self.triangles.ndim != 2 or self.triangles.shape[1] != 3:
            raise ValueError("triangles must be (nt, 3)")
        if len(self.boundary_flags) != len(self.vertices):
            raise ValueError("one boundary flag string per vertex required")
        areas = self.signed_areas()
        if np.any(areas <= 0):
            bad = int(np.argmin(areas))
            raise ValueError(f"triangle {bad} has nonpositive signed area")
        if rect is not None:
            total = float(areas.sum())
            if abs(total - rect.area) > 1e-12 * rect.area:
                raise ValueError("triangle areas do not sum to the domain area")

    @property
    def num_vertices(self) -> int:
        return len(self.vertices)

    @property
    def num_triangles(self) -> int:
        return len(self.triangles)

    def triangle_corners(self, vertices=None):
        """Corner coordinates per triangle, shape (nt, 3, 2)."""
        v = self.vertices if vertices is None else np.asarray(vertices, float)
        return v[self.triangles]

    def signed_areas(self, vertices=None) -> np.ndarray:
        c = self.triangle_corners(vertices)
        e1 = c[:, 1] - c[:, 0]
        e2 = c[:, 2] - c[:, 0]
        return 0.5 * (e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])

    def edge_matrices(self, vertices=None) -> np.ndarray:
        """Per-triangle edge matrix with edge vectors as columns, (nt, 2, 2)."""
        c = self.triangle_corners(vertices)
        m = np.empty((len(self.triangles), 2, 2))
        m[:, :, 0] = c[:, 1] - c[:, 0]
        m[:, :, 1] = c[:, 2] - c[:, 0]
        return m

    def is_boundary(self) -> np.ndarray:
        return np.array([bool(f) for f in self.boundary_flags])


class PLMap:
    """Piecewise-affine map: one target position per mesh vertex."""

    def __init__(self, mesh: TriangleMesh, target):
        self.mesh = mesh
        self.target = np.asarray(target, dtype=float)
        if self.target.shape != mesh.vertices.shape:
            raise ValueError("target must provide one point per vertex")

    def gradients(self) -> np.ndarray:
        """Per-triangle deformation gradients, shape (nt, 2, 2)."""
        src = self.mesh.edge_matrices()
        tgt = self.mesh.edge_matrices(self.target)
        return tgt @ np.linalg.inv(src)

    def image_signed_areas(self) -> np.ndarray:
        return self.mesh.signed_areas(self.target)

    def orientation_preserving(self) -> bool:
        return bool(np.all(self.image_signed_areas() > 0))


def make_rect_mesh(rect: Rect, nx: int, ny: int) -> TriangleMesh:
    """Regular grid triangulation of ``rect`` with nx-by-ny cells.

    Each cell is split along the diagonal from its lower-left to its
    upper-right corner, giving 2*nx*ny counterclockwise triangles.
    """
    if nx < 1 or ny < 1:
        raise ValueError("subdivision counts must be at least 1")
    xs = np.linspace(rect.xmin, rect.xmax, nx + 1)
    ys = np.linspace(rect.ymin, rect.ymax, ny + 1)
    xx, yy = np.meshgrid(xs, ys, indexing="ij")
    vertices = np.column_stack([xx.ravel(), yy.ravel()])

    def vid(i, j):
        return i * (ny + 1) + j

    triangles = []
    for i in range(nx):
        for j in range(ny):
            v00, v10 = vid(i, j), vid(i + 1, j)
            v01, v11 = vid(i, j + 1), vid(i + 1, j + 1)
            triangles.append((v00, v10, v11))
            triangles.append((v00, v11, v01))

    flags = []
    for i in range(nx + 1):
        for j in range(ny + 1):
            f = ""
            if i == 0:
                f += SIDE_LEFT
            if i == nx:
                f += SIDE_RIGHT
            if j == 0:
                f += SIDE_BOTTOM
            if j == ny:
                f += SIDE_TOP
            flags.append(f)
    return TriangleMesh(vertices, triangles, flags, rect=rect)


def identity_map(mesh: TriangleMesh) -> PLMap:
    return PLMap(mesh, mesh.vertices.copy())


def affine_gradient(mesh: TriangleMesh, plmap: PLMap, tri: int) -> np.ndarray:
    """Gradient of the affine map sending source triangle ``tri`` to its image."""
    if not 0 <= tri < mesh.num_triangles:
        raise IndexError(f"triangle index {tri} out of range")
    src = mesh.edge_matrices()[tri]
    if abs(src[0, 0] * src[1, 1] - src[0, 1] * src[1, 0]) == 0.0:
        raise ValueError(f"source triangle {tri} is degenerate")
    tgt = mesh.edge_matrices(plmap.target)[tri]
    return tgt @ np.linalg.inv(src)


def jacobian(A) -> float:
    A = np.asarray(A, dtype=float)
    return float(A[..., 0, 0] * A[..., 1, 1] - A[..., 0, 1] * A[..., 1, 0])


def hs_norm(A) -> float:
    A = np.asarray(A, dtype=float)
    return float(np.sqrt((A * A).sum()))


def distortion(A) -> float:
    """Hilbert-Schmidt distortion |A|^2 / (2 det A); always >= 1 for det > 0."""
    det = jacobian(A)
    if det <= 0:
        raise ValueError("distortion requires a positive determinant")
    return hs_norm(A) ** 2 / (2.0 * det)


def write_mesh(mesh: TriangleMesh, path) -> None:
    """Plain-text mesh format: 'NV NT', NV lines 'x y flag', NT lines 'i j k'."""
    lines = [f"{mesh.num_vertices} {mesh.num_triangles}"]
    for (x, y), f in zip(mesh.vertices, mesh.boundary_flags):
        lines.append(f"{x:.17g} {y:.17g} {f or _INTERIOR_TOKEN}")
    for i, j, k in mesh.triangles:
        lines.append(f"{i} {j} {k}")
    with open(path, "w", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def read_mesh(path, rect: Rect | None = None) -> TriangleMesh:
    with open(path) as fh:
        tokens = fh.read().split("\n")
    nv, nt = map(int, tokens[0].split())
    vertices, flags, triangles = [], [], []
    for line in tokens[1:1 + nv]:
        xs, ys, f = line.split()
        vertices.append((float(xs), float(ys)))
        flags.append("" if f == _INTERIOR_TOKEN else f)
    for line in tokens[1 + nv:1 + nv + nt]:
        triangles.append(tuple(map(int, line.split())))
    return TriangleMesh(vertices, triangles, flags, rect=rect)
