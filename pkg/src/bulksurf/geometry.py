"""Star-shaped cross-sections given by truncated Fourier radii, and their meshes.

A cross-section is ``{r * rho(theta) * (cos theta, sin theta) : 0 <= r < 1}`` with

    rho(theta) = a0 + sum_k a_k cos(k theta) + b_k sin(k theta).

Boundary geometry (normals, curvature, arclength density) is evaluated from the
series itself, never from the discrete polygon.  Meshes are obtained by pushing
a layered polar triangulation of the unit disk through the radial map.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

N_QUAD = 4096
VALIDITY_RATIO = 1e-6


class InvalidShapeError(ValueError):
    """The radial function is not strictly positive."""


class MeshQualityError(RuntimeError):
    """A mapped triangle came out inverted or degenerate."""


def _theta_grid(n: int = N_QUAD) -> np.ndarray:
    return 2.0 * np.pi * np.arange(n) / n


@dataclass(frozen=True)
class FourierShape:
    """Truncated Fourier series for the boundary radius.

    ``a`` and ``b`` hold the cosine and sine coefficients for modes ``1..M``.
    Construction fails with :class:`InvalidShapeError` when ``rho`` is not
    positive on a 4096-point grid.
    """

    a0: float
    a: tuple[float, ...] = ()
    b: tuple[float, ...] = ()

    def __post_init__(self):
        a = tuple(float(x) for x in self.a)
        b = tuple(float(x) for x in self.b)
        m = max(len(a), len(b))
        a = a + (0.0,) * (m - len(a))
        b = b + (0.0,) * (m - len(b))
        object.__setattr__(self, "a0", float(self.a0))
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)
        if not all(math.isfinite(x) for x in (self.a0, *a, *b)):
            raise InvalidShapeError("non-finite Fourier coefficient")
        rho = self.radius(_theta_grid())
        if self.a0 <= 0.0 or rho.min() <= VALIDITY_RATIO * self.a0:
            raise InvalidShapeError(
                f"radius must stay positive (min sampled rho = {rho.min():.3e})"
            )

    # -- construction helpers ---------------------------------------------
    @classmethod
    def circle(cls, radius: float, M: int = 0) -> "FourierShape":
        return cls(radius, (0.0,) * M, (0.0,) * M)

    @classmethod
    def from_vector(cls, v: Sequence[float]) -> "FourierShape":
        """Inverse of :meth:`to_vector` (ordering ``a0, a_1..a_M, b_1..b_M``)."""
        v = np.asarray(v, dtype=float)
        if v.size % 2 != 1:
            raise ValueError("coefficient vector must have odd length 2M+1")
        m = (v.size - 1) // 2
        return cls(v[0], tuple(v[1 : m + 1]), tuple(v[m + 1 :]))

    @property
    def M(self) -> int:
        return len(self.a)

    def to_vector(self) -> np.ndarray:
        return np.concatenate([[self.a0], self.a, self.b])

    def with_modes(self, M: int) -> "FourierShape":
        """Pad (or truncate) to exactly ``M`` modes."""
        a = (self.a + (0.0,) * M)[:M]
        b = (self.b + (0.0,) * M)[:M]
        return FourierShape(self.a0, a, b)

    # -- evaluation -------------------------------------------------------
    def eval(self, theta) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Return ``rho, rho', rho''`` at ``theta`` (scalar or array)."""
        theta = np.asarray(theta, dtype=float)
        rho = np.full(theta.shape, self.a0)
        d1 = np.zeros(theta.shape)
        d2 = np.zeros(theta.shape)
        for k, (ak, bk) in enumerate(zip(self.a, self.b), start=1):
            if ak == 0.0 and bk == 0.0:
                continue
            c = np.cos(k * theta)
            s = np.sin(k * theta)
            rho += ak * c + bk * s
            d1 += k * (bk * c - ak * s)
            d2 -= k * k * (ak * c + bk * s)
        return rho, d1, d2

    def radius(self, theta) -> np.ndarray:
        return self.eval(theta)[0]

    def min_radius(self) -> float:
        return float(self.radius(_theta_grid()).min())

    def area(self) -> float:
        rho = self.radius(_theta_grid())
        return float(0.5 * np.sum(rho**2) * (2.0 * np.pi / N_QUAD))

    def perimeter(self) -> float:
        rho, d1, _ = self.eval(_theta_grid())
        return float(np.sum(np.hypot(rho, d1)) * (2.0 * np.pi / N_QUAD))

    # -- transformations --------------------------------------------------
    def scaled(self, s: float) -> "FourierShape":
        if s <= 0:
            raise ValueError("scale factor must be positive")
        return FourierShape(s * self.a0, tuple(s * x for x in self.a), tuple(s * x for x in self.b))

    def __str__(self) -> str:
        return f"FourierShape(a0={self.a0:g}, M={self.M})"


def shape_eval(shape: FourierShape, theta):
    return shape.eval(theta)


def shape_area(shape: FourierShape) -> float:
    """Area ``0.5 * int rho^2``, 4096-point trapezoid rule."""
    return shape.area()


def shape_perimeter(shape: FourierShape) -> float:
    """Perimeter ``int sqrt(rho^2 + rho'^2)``, 4096-point trapezoid rule."""
    return shape.perimeter()


def scale_shape(shape: FourierShape, s: float) -> FourierShape:
    return shape.scaled(s)


def project_area(shape: FourierShape, target: float) -> FourierShape:
    if target <= 0:
        raise ValueError("target area must be positive")
    return shape.scaled(math.sqrt(target / shape.area()))


def project_perimeter(shape: FourierShape, target: float) -> FourierShape:
    if target <= 0:
        raise ValueError("target perimeter must be positive")
    return shape.scaled(target / shape.perimeter())


# -- boundary geometry ----------------------------------------------------


@dataclass(frozen=True)
class BoundaryPoint:
    angle: float
    position: np.ndarray
    normal: np.ndarray
    curvature: float
    arclength_weight: float


def _boundary_arrays(shape: FourierShape, theta: np.ndarray):
    rho, d1, d2 = shape.eval(theta)
    if np.any(rho <= 0.0):
        raise InvalidShapeError("nonpositive radius on the boundary")
    c, s = np.cos(theta), np.sin(theta)
    speed = np.hypot(rho, d1)
    pos = np.column_stack([rho * c, rho * s])
    # (rho * rhat - rho' * rhat') / |T|, with rhat' = (-sin, cos)
    normal = np.column_stack([rho * c + d1 * s, rho * s - d1 * c]) / speed[:, None]
    curvature = (rho**2 + 2.0 * d1**2 - rho * d2) / speed**3
    return pos, normal, curvature, speed


def boundary_geometry(shape: FourierShape, theta: float) -> BoundaryPoint:
    pos, normal, curv, speed = _boundary_arrays(shape, np.atleast_1d(float(theta)))
    return BoundaryPoint(float(theta), pos[0], normal[0], float(curv[0]), float(speed[0]))


# -- meshing ----------------------------------------------------------------


@dataclass(eq=False)
class Mesh:
    """P1 triangulation of a star-shaped cross-section.

    ``boundary`` lists the boundary vertices in counterclockwise order;
    ``boundary_edges[i] = (boundary[i], boundary[i+1])`` closes the loop.  The
    per-node arrays ``bnd_theta``, ``bnd_normal``, ``bnd_curvature`` and
    ``bnd_speed`` (= ds/dtheta) are aligned with ``boundary``.
    """

    vertices: np.ndarray
    triangles: np.ndarray
    boundary: np.ndarray
    bnd_theta: np.ndarray
    bnd_normal: np.ndarray
    bnd_curvature: np.ndarray
    bnd_speed: np.ndarray
    target_h: float
    n_rings: int
    shape: FourierShape | None = None
    _cache: dict = field(default_factory=dict, repr=False)

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def boundary_edges(self) -> np.ndarray:
        return np.column_stack([self.boundary, np.roll(self.boundary, -1)])

    @property
    def boundary_nodes(self) -> dict[int, BoundaryPoint]:
        return {
            int(v): BoundaryPoint(
                float(t), self.vertices[v], self.bnd_normal[i], float(self.bnd_curvature[i]), float(self.bnd_speed[i])
            )
            for i, (v, t) in enumerate(zip(self.boundary, self.bnd_theta))
        }

    def signed_areas(self) -> np.ndarray:
        p = self.vertices[self.triangles]
        e1 = p[:, 1] - p[:, 0]
        e2 = p[:, 2] - p[:, 0]
        return 0.5 * (e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])

    def area(self) -> float:
        return float(self.signed_areas().sum())

    def edge_lengths(self) -> np.ndarray:
        """Chord lengths of the boundary edges."""
        e = self.vertices[self.boundary_edges]
        return np.linalg.norm(e[:, 1] - e[:, 0], axis=1)

    def boundary_length(self) -> float:
        return float(self.edge_lengths().sum())


def rings_for(shape: FourierShape, target_h: float) -> int:
    """Ring count giving boundary spacing ``target_h / sqrt(3)``.

    ``target_h`` is read as an element diameter, so edges are shorter by
    sqrt(3); with this convention the unit disk gets ~920 vertices at
    ``h = 0.11`` and ~21000 at ``h = 0.022``.
    """
    spacing = target_h / math.sqrt(3.0)
    return max(2, math.ceil(shape.perimeter() / (6.0 * spacing) - 1e-9))


def _disk_topology(n: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Polar layered unit-disk triangulation: returns (r, theta, triangles)."""
    r = [0.0]
    th = [0.0]
    for j in range(1, n + 1):
        k = np.arange(6 * j)
        r.extend([j / n] * (6 * j))
        th.extend(2.0 * np.pi * k / (6 * j))
    tris = [(0, 1 + k, 1 + (k + 1) % 6) for k in range(6)]
    for j in range(1, n):
        inner0 = 1 + 3 * j * (j - 1)
        outer0 = 1 + 3 * (j + 1) * j
        ni, no = 6 * j, 6 * (j + 1)
        a = b = 0
        while a < ni or b < no:
            # advance whichever ring has the smaller next angle (exact integer test)
            if a == ni or (b < no and (b + 1) * j <= (a + 1) * (j + 1)):
                tris.append((inner0 + a % ni, outer0 + b % no, outer0 + (b + 1) % no))
                b += 1
            else:
                tris.append((inner0 + a % ni, outer0 + b % no, inner0 + (a + 1) % ni))
                a += 1
    return np.asarray(r), np.asarray(th), np.asarray(tris, dtype=np.int64)


def build_mesh(shape: FourierShape, target_h: float, n_rings: int | None = None) -> Mesh:
    """Mesh ``shape`` by mapping a layered polar disk mesh through ``rho``.

    ``n_rings`` overrides the ring count derived from ``target_h``; keeping it
    fixed makes vertex positions depend smoothly on the Fourier coefficients.
    """
    if target_h <= 0:
        raise ValueError("target_h must be positive")
    n = rings_for(shape, target_h) if n_rings is None else int(n_rings)
    if n < 1:
        raise ValueError("need at least one ring")
    r, th, tris = _disk_topology(n)
    rho = shape.radius(th)
    verts = np.column_stack([r * rho * np.cos(th), r * rho * np.sin(th)])
    nb = 6 * n
    boundary = np.arange(len(r) - nb, len(r))
    bth = th[boundary]
    pos, normal, curv, speed = _boundary_arrays(shape, bth)
    verts[boundary] = pos
    mesh = Mesh(verts, tris, boundary, bth, normal, curv, speed, float(target_h), n, shape)
    areas = mesh.signed_areas()
    scale = shape.a0**2 / (6.0 * n * n)
    if np.any(areas <= 1e-10 * scale):
        bad = int(np.sum(areas <= 1e-10 * scale))
        raise MeshQualityError(f"{bad} inverted or degenerate triangles; rho too oscillatory for h={target_h}")
    return mesh


def write_mesh(mesh: Mesh, path) -> None:
    """Plain-text dump: counts line, vertices, triangles, boundary chain."""
    lines = [f"{mesh.n_vertices} {len(mesh.triangles)} {len(mesh.boundary)}"]
    lines += [f"{x:.17g} {y:.17g}" for x, y in mesh.vertices]
    lines += [f"{i} {j} {k}" for i, j, k in mesh.triangles]
    lines += [f"{v} {t:.17g}" for v, t in zip(mesh.boundary, mesh.bnd_theta)]
    Path(path).write_text("\n".join(lines) + "\n")


# -- shape files --------------------------------------------------------------


def write_shape(shape: FourierShape, path) -> None:
    lines = [str(shape.M), f"{shape.a0:.17g}"]
    lines += [f"{ak:.17g} {bk:.17g}" for ak, bk in zip(shape.a, shape.b)]
    Path(path).write_text("\n".join(lines) + "\n")


def parse_shape(text: str) -> FourierShape:
    rows = [ln.split() for ln in text.splitlines() if ln.strip()]
    if len(rows) < 2:
        raise ValueError("shape file needs at least the mode count and a0")
    m = int(rows[0][0])
    if len(rows) < m + 2:
        raise ValueError(f"shape file declares {m} modes but has {len(rows) - 2} rows")
    a0 = float(rows[1][0])
    pairs = [(float(r[0]), float(r[1])) for r in rows[2 : m + 2]]
    return FourierShape(a0, tuple(p[0] for p in pairs), tuple(p[1] for p in pairs))


def read_shape(path) -> FourierShape:
    return parse_shape(Path(path).read_text())
