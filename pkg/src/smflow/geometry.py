"""Kahler target manifolds: metrics, curvature, charts, parallel transport.

Targets come in two representations.  Spheres (round or conformally warped)
are embedded in R^3 and points are ambient 3-vectors; the hyperbolic disk
and the flat torus are chart-based and points are 2-vectors of chart
coordinates.  Products concatenate the coordinates of their factors.

The complex structure J is p x v / radius on embedded spheres and rotation
by 90 degrees in conformal charts; both satisfy J*J = -1 and are isometric
for the respective metric.

Parallel transport integrates the frame equation for a single tangent
vector e1 with classical RK4 (per-step tangent re-projection and metric
renormalization) and carries e2 = J e1 along algebraically.  Arbitrary
vectors are moved by freezing their coefficients in that frame, so
transport commutes with J and preserves inner products to roundoff by
construction; the integrator accuracy only enters through the frame
itself.  Closed loops are interpolated trigonometrically (the scheme is
then 4th order in the sample spacing); open sampled paths use local cubic
interpolation.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import (
    OffManifoldError,
    SingularChartError,
    UnsupportedOperationError,
)

_Z_AXIS = np.array([0.0, 0.0, 1.0])
_X_AXIS = np.array([1.0, 0.0, 0.0])

# spacing for the centered second differences behind warped curvature
_LAPLACE_STEP = 1e-4
# spacing for centered first differences of the curvature itself
_CURV_GRAD_STEP = 1e-3
# ambient distance from the manifold at which points are rejected
MANIFOLD_TOL = 1e-10


@dataclass(frozen=True, eq=False)
class SurfaceModel:
    """A target manifold; build with the factory functions below."""

    kind: str
    radius: float = 1.0
    warp: Optional[Callable[[np.ndarray], np.ndarray]] = None
    warp_grad: Optional[Callable[[np.ndarray], np.ndarray]] = None
    factors: tuple = ()

    # -- structure ----------------------------------------------------------

    @property
    def embedded(self) -> bool:
        return self.kind in ("round_sphere", "warped_sphere")

    @property
    def complex_dim(self) -> int:
        if self.kind == "product":
            return sum(f.complex_dim for f in self.factors)
        return 1

    @property
    def point_dim(self) -> int:
        if self.kind == "product":
            return sum(f.point_dim for f in self.factors)
        return 3 if self.embedded else 2

    def factor_slices(self):
        out, idx = [], 0
        for f in self.factors:
            out.append((f, slice(idx, idx + f.point_dim)))
            idx += f.point_dim
        return out

    # -- pointwise primitives (vectorized over leading axes) ----------------

    def validate_points(self, p: np.ndarray, tol: float = MANIFOLD_TOL) -> None:
        p = np.asarray(p, dtype=float)
        if p.shape[-1] != self.point_dim:
            raise OffManifoldError(
                f"expected point dimension {self.point_dim}, got {p.shape[-1]}"
            )
        if self.kind == "product":
            for f, sl in self.factor_slices():
                f.validate_points(p[..., sl], tol)
            return
        if self.embedded:
            err = np.abs(np.linalg.norm(p, axis=-1) - self.radius)
            worst = float(err.max()) if err.size else 0.0
            if worst > tol * max(1.0, self.radius):
                raise OffManifoldError(
                    f"point leaves the radius-{self.radius} sphere by {worst:.3e}"
                )
        elif self.kind == "hyperbolic_disk":
            r = np.linalg.norm(p, axis=-1)
            if r.size and float(r.max()) >= 1.0:
                raise OffManifoldError("chart point outside the unit disk")
        # flat torus: every chart point is valid

    def project_point(self, p: np.ndarray) -> np.ndarray:
        """Nearest manifold representative (renormalization for spheres)."""
        p = np.asarray(p, dtype=float)
        if self.kind == "product":
            out = p.copy()
            for f, sl in self.factor_slices():
                out[..., sl] = f.project_point(p[..., sl])
            return out
        if self.embedded:
            return p * (self.radius / np.linalg.norm(p, axis=-1, keepdims=True))
        return p.copy()

    def conformal_factor(self, p: np.ndarray) -> np.ndarray:
        """log of the conformal scale of the metric relative to the base."""
        p = np.asarray(p, dtype=float)
        if self.kind == "warped_sphere":
            return np.asarray(self.warp(p), dtype=float)
        if self.kind == "hyperbolic_disk":
            r2 = np.sum(p * p, axis=-1)
            return np.log(2.0 / (1.0 - r2))
        return np.zeros(p.shape[:-1])

    def metric(self, p: np.ndarray, v: np.ndarray, w: np.ndarray) -> np.ndarray:
        if self.kind == "product":
            parts = [f.metric(p[..., sl], v[..., sl], w[..., sl])
                     for f, sl in self.factor_slices()]
            return np.sum(parts, axis=0)
        dot = np.sum(np.asarray(v) * np.asarray(w), axis=-1)
        if self.kind in ("round_sphere", "flat_torus"):
            return dot
        return np.exp(2.0 * self.conformal_factor(p)) * dot

    def apply_J(self, p: np.ndarray, v: np.ndarray) -> np.ndarray:
        if self.kind == "product":
            out = np.empty_like(np.asarray(v, dtype=float))
            for f, sl in self.factor_slices():
                out[..., sl] = f.apply_J(p[..., sl], v[..., sl])
            return out
        if self.embedded:
            return np.cross(p, v) / self.radius
        v = np.asarray(v)
        return np.stack([-v[..., 1], v[..., 0]], axis=-1)

    def tangent_project(self, p: np.ndarray, w: np.ndarray) -> np.ndarray:
        if self.kind == "product":
            out = np.empty_like(np.asarray(w, dtype=float))
            for f, sl in self.factor_slices():
                out[..., sl] = f.tangent_project(p[..., sl], w[..., sl])
            return out
        if not self.embedded:
            return np.asarray(w, dtype=float).copy()
        n = p / self.radius
        return w - np.sum(w * n, axis=-1, keepdims=True) * n

    # -- curvature ----------------------------------------------------------

    def _sphere_tangent_basis(self, p: np.ndarray):
        """Some orthonormal tangent basis at each point of the unit sphere."""
        t1 = np.cross(np.broadcast_to(_Z_AXIS, p.shape), p)
        bad = np.linalg.norm(t1, axis=-1) < 1e-8
        if np.any(bad):
            alt = np.cross(np.broadcast_to(_X_AXIS, p.shape), p)
            t1 = np.where(bad[..., None], alt, t1)
        t1 = t1 / np.linalg.norm(t1, axis=-1, keepdims=True)
        t2 = np.cross(p, t1)
        return t1, t2

    def _warp_laplacian(self, p: np.ndarray) -> np.ndarray:
        """Laplace-Beltrami of the warp on the round unit sphere.

        Centered geodesic second differences along an orthonormal tangent
        pair; the warp callable only needs values (first derivatives of the
        warp are supplied analytically elsewhere, second ones are not).
        """
        eps = _LAPLACE_STEP
        t1, t2 = self._sphere_tangent_basis(p)
        c, s = np.cos(eps), np.sin(eps)
        total = np.zeros(p.shape[:-1])
        lam0 = np.asarray(self.warp(p), dtype=float)
        for t in (t1, t2):
            plus = self.warp(c * p + s * t)
            minus = self.warp(c * p - s * t)
            total = total + (np.asarray(plus) + np.asarray(minus) - 2.0 * lam0)
        return total / eps**2

    def gaussian_curvature(self, p: np.ndarray) -> np.ndarray:
        p = np.asarray(p, dtype=float)
        if self.kind == "round_sphere":
            return np.full(p.shape[:-1], 1.0 / self.radius**2)
        if self.kind == "warped_sphere":
            lam = np.asarray(self.warp(p), dtype=float)
            return np.exp(-2.0 * lam) * (1.0 - self._warp_laplacian(p))
        if self.kind == "hyperbolic_disk":
            return np.full(p.shape[:-1], -1.0)
        if self.kind == "flat_torus":
            return np.zeros(p.shape[:-1])
        raise UnsupportedOperationError(
            "scalar curvature of a product is per factor; query the factors"
        )

    def curvature_gradient(self, p: np.ndarray) -> np.ndarray:
        """Differential of K as an ambient (co)vector: dK(v) = grad . v."""
        p = np.asarray(p, dtype=float)
        if self.kind in ("round_sphere", "hyperbolic_disk", "flat_torus"):
            return np.zeros_like(p)
        if self.kind != "warped_sphere":
            raise UnsupportedOperationError("curvature gradient is per factor")
        eps = _CURV_GRAD_STEP
        t1, t2 = self._sphere_tangent_basis(p)
        c, s = np.cos(eps), np.sin(eps)
        out = np.zeros_like(p)
        for t in (t1, t2):
            kp = self.gaussian_curvature(self.project_point(c * p + s * t))
            km = self.gaussian_curvature(self.project_point(c * p - s * t))
            out = out + ((kp - km) / (2.0 * eps))[..., None] * t
        return out


# -- factories ---------------------------------------------------------------


def round_sphere(radius: float = 1.0) -> SurfaceModel:
    if radius <= 0:
        raise ValueError("radius must be positive")
    return SurfaceModel(kind="round_sphere", radius=radius)


def warped_sphere(warp: Callable, warp_grad: Callable) -> SurfaceModel:
    """Unit sphere with metric exp(2*warp) times the round one.

    ``warp`` maps points (..., 3) to scalars; ``warp_grad`` returns an
    ambient gradient (any smooth extension; it is projected tangentially
    where a tangential differential is required).
    """
    return SurfaceModel(kind="warped_sphere", radius=1.0,
                        warp=warp, warp_grad=warp_grad)


def bump_warp(amplitude: float, width: float, center=(0.0, 0.0, 1.0)):
    """Gaussian bump conformal factor with an analytic gradient."""
    c = np.asarray(center, dtype=float)
    c = c / np.linalg.norm(c)
    w2 = float(width) ** 2

    def warp(p):
        d = np.asarray(p, dtype=float) - c
        return amplitude * np.exp(-np.sum(d * d, axis=-1) / (2.0 * w2))

    def warp_grad(p):
        d = np.asarray(p, dtype=float) - c
        val = amplitude * np.exp(-np.sum(d * d, axis=-1) / (2.0 * w2))
        return -val[..., None] * d / w2

    return warp, warp_grad


def hyperbolic_disk() -> SurfaceModel:
    return SurfaceModel(kind="hyperbolic_disk")


def flat_torus() -> SurfaceModel:
    return SurfaceModel(kind="flat_torus")


def product_surface(*factors: SurfaceModel) -> SurfaceModel:
    if len(factors) < 2:
        raise ValueError("a product needs at least two factors")
    if any(f.kind == "product" for f in factors):
        raise UnsupportedOperationError("nested products are not supported")
    return SurfaceModel(kind="product", factors=tuple(factors))


# -- tangent vectors ----------------------------------------------------------


@dataclass
class TangentVector:
    """A tangent vector attached to a base point."""

    point: np.ndarray
    components: np.ndarray

    def __post_init__(self):
        self.point = np.asarray(self.point, dtype=float)
        self.components = np.asarray(self.components, dtype=float)

    def tangency_residual(self, surface: SurfaceModel) -> float:
        off = self.components - surface.tangent_project(self.point, self.components)
        return float(np.linalg.norm(off))


# -- spec-level operations -----------------------------------------------------


def curvature_at(surface: SurfaceModel, p: np.ndarray) -> np.ndarray:
    """Gaussian curvature; validates that p lies on the manifold."""
    surface.validate_points(p)
    return surface.gaussian_curvature(np.asarray(p, dtype=float))


def project_tangent(surface: SurfaceModel, p: np.ndarray, w: np.ndarray) -> np.ndarray:
    """Orthogonal projection onto the tangent space (embedded targets)."""
    if not (surface.embedded or surface.kind == "product"):
        raise UnsupportedOperationError(
            "tangent projection only applies to embedded representations"
        )
    surface.validate_points(p)
    return surface.tangent_project(np.asarray(p, dtype=float),
                                   np.asarray(w, dtype=float))


def sphere_chart_point(q: np.ndarray, radius: float = 1.0) -> np.ndarray:
    """Embedding of (colatitude, longitude) chart coordinates."""
    q = np.asarray(q, dtype=float)
    th, ph = q[..., 0], q[..., 1]
    return radius * np.stack(
        [np.sin(th) * np.cos(ph), np.sin(th) * np.sin(ph), np.cos(th)], axis=-1
    )


def chart_metric(surface: SurfaceModel, q: np.ndarray) -> np.ndarray:
    """Metric components in the declared chart, shape (..., 2, 2)."""
    q = np.asarray(q, dtype=float)
    if surface.kind in ("round_sphere", "warped_sphere"):
        th = q[..., 0]
        g = np.zeros(q.shape[:-1] + (2, 2))
        g[..., 0, 0] = surface.radius**2
        g[..., 1, 1] = (surface.radius * np.sin(th)) ** 2
        if surface.kind == "warped_sphere":
            lam = surface.warp(sphere_chart_point(q))
            g = np.exp(2.0 * np.asarray(lam))[..., None, None] * g
        return g
    if surface.kind == "hyperbolic_disk":
        r2 = np.sum(q * q, axis=-1)
        conf = (2.0 / (1.0 - r2)) ** 2
        return conf[..., None, None] * np.eye(2)
    if surface.kind == "flat_torus":
        return np.broadcast_to(np.eye(2), q.shape[:-1] + (2, 2)).copy()
    raise UnsupportedOperationError("no declared chart for this target")


def christoffel_at(surface: SurfaceModel, q: np.ndarray) -> np.ndarray:
    """Christoffel symbols Gamma^k_{ij} in the declared chart, (..., 2, 2, 2).

    Layout: result[..., k, i, j].  Sphere charts are (colatitude, longitude)
    and are rejected near the poles where the chart degenerates.
    """
    q = np.asarray(q, dtype=float)
    if surface.kind in ("round_sphere", "warped_sphere"):
        th = q[..., 0]
        s, c = np.sin(th), np.cos(th)
        if np.any(np.abs(s) < 1e-6):
            raise SingularChartError(
                "colatitude-longitude chart is singular at the poles"
            )
        gam = np.zeros(q.shape[:-1] + (2, 2, 2))
        gam[..., 0, 1, 1] = -s * c
        gam[..., 1, 0, 1] = c / s
        gam[..., 1, 1, 0] = c / s
        if surface.kind == "warped_sphere":
            # conformal change: add d^k_i l_j + d^k_j l_i - g_ij g^kl l_l
            p = sphere_chart_point(q)
            grad = np.asarray(surface.warp_grad(p), dtype=float)
            e_th = np.stack([c * np.cos(q[..., 1]), c * np.sin(q[..., 1]), -s],
                            axis=-1)
            e_ph = np.stack([-s * np.sin(q[..., 1]), s * np.cos(q[..., 1]),
                             np.zeros_like(s)], axis=-1)
            l1 = np.sum(grad * e_th, axis=-1)
            l2 = np.sum(grad * e_ph, axis=-1)
            lam_d = np.stack([l1, l2], axis=-1)
            g = np.stack([np.ones_like(s), s * s], axis=-1)  # diagonal, radius 1
            extra = np.zeros_like(gam)
            for k in range(2):
                for i in range(2):
                    for j in range(2):
                        term = 0.0
                        if k == i:
                            term = term + lam_d[..., j]
                        if k == j:
                            term = term + lam_d[..., i]
                        if i == j:
                            term = term - g[..., i] * lam_d[..., k] / g[..., k]
                        extra[..., k, i, j] = term
            gam = gam + extra
        return gam
    if surface.kind in ("hyperbolic_disk", "flat_torus"):
        gam = np.zeros(q.shape[:-1] + (2, 2, 2))
        if surface.kind == "hyperbolic_disk":
            surface.validate_points(q)
            r2 = np.sum(q * q, axis=-1)
            lx = 2.0 * q[..., 0] / (1.0 - r2)
            ly = 2.0 * q[..., 1] / (1.0 - r2)
            gam[..., 0, 0, 0] = lx
            gam[..., 0, 0, 1] = ly
            gam[..., 0, 1, 0] = ly
            gam[..., 0, 1, 1] = -lx
            gam[..., 1, 1, 1] = ly
            gam[..., 1, 0, 1] = lx
            gam[..., 1, 1, 0] = lx
            gam[..., 1, 0, 0] = -ly
        return gam
    raise UnsupportedOperationError("no declared chart for this target")


# -- parallel transport --------------------------------------------------------


def _covariant_rhs(surface: SurfaceModel, u, du, v):
    """Ambient/chart derivative of v enforcing covariant constancy along u."""
    if surface.kind == "round_sphere":
        return -(np.dot(v, du) / surface.radius**2) * u
    if surface.kind == "warped_sphere":
        grad = np.asarray(surface.warp_grad(u), dtype=float)
        grad = grad - np.dot(grad, u) * u  # tangential part on the unit sphere
        rhs = -np.dot(v, du) * u
        rhs = rhs - np.dot(grad, du) * v - np.dot(grad, v) * du
        rhs = rhs + np.dot(du, v) * grad
        return rhs
    # chart targets: dv^k = -Gamma^k_{ij} du^i v^j
    gam = christoffel_at(surface, u)
    return -np.einsum("kij,i,j->k", gam, du, v)


def _transport_frame(surface: SurfaceModel, nodes, mids, dnodes, dmids, e1):
    """RK4 transport of e1 through consecutive samples.

    nodes: (M+1, d) points; mids: (M, d) midpoints; dnodes/dmids: path
    derivative times the step (so each step integrates over sigma in [0,1]).
    Returns e1 at every node, renormalized to unit metric length and
    re-projected tangentially after each step.
    """
    out = np.empty_like(nodes)
    v = np.asarray(e1, dtype=float).copy()

    def normalize(p, w):
        w = surface.tangent_project(p, w)
        return w / np.sqrt(surface.metric(p, w, w))

    v = normalize(nodes[0], v)
    out[0] = v
    m = nodes.shape[0] - 1
    for i in range(m):
        u0, um, u1 = nodes[i], mids[i], nodes[i + 1]
        d0, dm, d1 = dnodes[i], dmids[i], dnodes[i + 1]
        k1 = _covariant_rhs(surface, u0, d0, v)
        k2 = _covariant_rhs(surface, um, dm, v + 0.5 * k1)
        k3 = _covariant_rhs(surface, um, dm, v + 0.5 * k2)
        k4 = _covariant_rhs(surface, u1, d1, v + k3)
        v = v + (k1 + 2.0 * k2 + 2.0 * k3 + k4) / 6.0
        v = normalize(u1, v)
        out[i + 1] = v
    return out


def _closed_loop_path_data(surface: SurfaceModel, points: np.ndarray):
    """Node/midpoint samples of a closed loop via trigonometric interpolation."""
    from .spectral import SpectralGrid

    n = points.shape[0]
    grid = SpectralGrid(n, "circle")
    fine = grid.upsample(points, 2)
    dpath = grid.derivative(points) / n  # d(point)/d(step index)
    dfine = grid.upsample(dpath, 2)
    if surface.embedded or surface.kind == "product":
        fine = surface.project_point(fine)
    nodes = np.vstack([fine[0::2], points[:1]])
    mids = fine[1::2]
    dnodes = np.vstack([dfine[0::2], dfine[:1]])
    dmids = dfine[1::2]
    return nodes, mids, dnodes, dmids


def _open_path_data(surface: SurfaceModel, points: np.ndarray):
    """Cubic-interpolated node/midpoint samples of an open sampled path."""
    m = points.shape[0] - 1
    if m < 1:
        raise ValueError("a path needs at least two samples")
    if m < 3:
        # too short for cubic stencils: linear fallback
        mids = 0.5 * (points[:-1] + points[1:])
        dnodes = np.gradient(points, axis=0)
        dmids = points[1:] - points[:-1]
        if surface.embedded:
            mids = surface.project_point(mids)
        return points.copy(), mids, dnodes, dmids

    idx = np.arange(m)
    base = np.clip(idx - 1, 0, m - 3)
    offs = idx - base  # position of the step start inside the stencil
    stack = np.stack([points[base + j] for j in range(4)], axis=1)  # (m,4,d)

    def lagrange_weights(xi):
        xs = np.arange(4.0)
        w = np.ones((xi.shape[0], 4))
        dw = np.zeros((xi.shape[0], 4))
        for j in range(4):
            others = [k for k in range(4) if k != j]
            denom = np.prod([xs[j] - xs[k] for k in others])
            w[:, j] = np.prod([xi - xs[k] for k in others], axis=0) / denom
            s = np.zeros_like(xi)
            for drop in others:
                s += np.prod([xi - xs[k] for k in others if k != drop], axis=0)
            dw[:, j] = s / denom
        return w, dw

    w_mid, dw_mid = lagrange_weights(offs + 0.5)
    _, dw_node = lagrange_weights(offs.astype(float))
    mids = np.einsum("sj,sjd->sd", w_mid, stack)
    dmids = np.einsum("sj,sjd->sd", dw_mid, stack)
    dnode_start = np.einsum("sj,sjd->sd", dw_node, stack)
    w_end, dw_end = lagrange_weights(offs + 1.0)
    dnode_end = np.einsum("sj,sjd->sd", dw_end, stack)
    dnodes = np.vstack([dnode_start, dnode_end[-1:]])
    if surface.embedded:
        mids = surface.project_point(mids)
    return points.copy(), mids, dnodes, dmids


def _path_frame(surface: SurfaceModel, points, closed, seed=None):
    """Transported J-adapted frame (e1, e2 = J e1) along a sampled path."""
    points = np.asarray(points, dtype=float)
    surface.validate_points(points, tol=1e-8)
    if closed:
        nodes, mids, dn, dm = _closed_loop_path_data(surface, points)
    else:
        nodes, mids, dn, dm = _open_path_data(surface, points)
    if seed is None:
        seed = surface.tangent_project(nodes[0], dn[0])
        if np.linalg.norm(seed) < 1e-12:
            # degenerate start direction: fall back to any tangent axis
            for axis in np.eye(points.shape[-1]):
                seed = surface.tangent_project(nodes[0], axis)
                if np.linalg.norm(seed) > 1e-6:
                    break
    e1 = _transport_frame(surface, nodes, mids, dn, dm, seed)
    e2 = surface.apply_J(nodes, e1)
    return nodes, e1, e2


def parallel_transport(
    surface: SurfaceModel,
    path: np.ndarray,
    v0: TangentVector,
    closed: bool = False,
) -> TangentVector:
    """Parallel-transport v0 along a sampled path to its final point.

    ``path`` is an (M+1, d) array of manifold points; ``closed`` marks the
    samples as one full period of a smooth loop (the final point is the
    first one again and interpolation is trigonometric).
    """
    if surface.kind == "product":
        comps = np.empty(surface.point_dim)
        point = np.empty(surface.point_dim)
        for f, sl in surface.factor_slices():
            res = parallel_transport(
                f, np.asarray(path, dtype=float)[:, sl],
                TangentVector(v0.point[sl], v0.components[sl]), closed)
            comps[sl] = res.components
            point[sl] = res.point
        return TangentVector(point, comps)

    nodes, e1, e2 = _path_frame(surface, path, closed)
    p0, p1 = nodes[0], nodes[-1]
    c1 = surface.metric(p0, v0.components, e1[0])
    c2 = surface.metric(p0, v0.components, e2[0])
    return TangentVector(p1, c1 * e1[-1] + c2 * e2[-1])


def loop_frame(surface: SurfaceModel, points: np.ndarray, seed=None):
    """Frame (e1, e2) at every sample of a closed loop plus the wrap value.

    Returns (e1, e2, e1_wrap, e2_wrap): arrays over the N loop samples and
    the once-around transported frame at the start point, from which the
    loop holonomy can be read off.
    """
    nodes, e1, e2 = _path_frame(surface, points, closed=True, seed=seed)
    return e1[:-1], e2[:-1], e1[-1], e2[-1]


# -- reference frames and connection forms --------------------------------------


def _azimuthal_frame_raw(points: np.ndarray):
    w = np.cross(np.broadcast_to(_Z_AXIS, points.shape), points)
    norms = np.linalg.norm(w, axis=-1)
    if np.any(norms < 1e-6):
        raise SingularChartError(
            "azimuthal reference frame is singular near the poles"
        )
    f1 = w / norms[..., None]
    return f1


def reference_frame(surface: SurfaceModel, points: np.ndarray):
    """A smooth metric-orthonormal J-adapted frame along the given points.

    Spheres use the azimuthal frame (rejected near the poles); conformal
    charts use the normalized coordinate axes.  The frame is single-valued
    along any loop, which makes it a valid gauge for connection integrals.
    """
    points = np.asarray(points, dtype=float)
    if surface.kind == "product":
        raise UnsupportedOperationError("reference frames are per factor")
    if surface.embedded:
        f1 = _azimuthal_frame_raw(points / surface.radius) * surface.radius
        scale = np.exp(-surface.conformal_factor(points))[..., None]
        f1 = f1 * scale
        f2 = surface.apply_J(points, f1)
        return f1, f2
    scale = np.exp(-surface.conformal_factor(points))
    f1 = np.stack([scale, np.zeros_like(scale)], axis=-1)
    f2 = np.stack([np.zeros_like(scale), scale], axis=-1)
    return f1, f2


def reference_connection(
    surface: SurfaceModel, points: np.ndarray, vectors: np.ndarray
) -> np.ndarray:
    """Connection coefficient beta(v) = h(grad_v f1, f2) of the reference frame.

    ``vectors`` are tangent vectors at the corresponding points (loop
    derivatives or flow velocities).  The parallel-frame rotation relative
    to the reference frame integrates -beta.
    """
    points = np.asarray(points, dtype=float)
    vectors = np.asarray(vectors, dtype=float)
    if surface.kind == "product":
        raise UnsupportedOperationError("reference connections are per factor")
    if surface.embedded:
        # round part: f1 = normalize(z x p), omega(v) = <D_v f1, p x f1>
        p = points / surface.radius
        v = vectors / surface.radius
        w = np.cross(np.broadcast_to(_Z_AXIS, p.shape), p)
        norm = np.linalg.norm(w, axis=-1)
        if np.any(norm < 1e-6):
            raise SingularChartError(
                "azimuthal reference frame is singular near the poles"
            )
        zv = np.cross(np.broadcast_to(_Z_AXIS, v.shape), v)
        f1 = w / norm[..., None]
        f2 = np.cross(p, f1)
        dvf1 = zv / norm[..., None] - w * (
            np.sum(w * zv, axis=-1) / norm**3
        )[..., None]
        omega = np.sum(dvf1 * f2, axis=-1)
        if surface.kind == "warped_sphere":
            grad = np.asarray(surface.warp_grad(points), dtype=float)
            grad = grad - np.sum(grad * p, axis=-1, keepdims=True) * p
            jv = np.cross(p, vectors)
            omega = omega - np.sum(grad * jv, axis=-1) / surface.radius
        return omega
    if surface.kind == "hyperbolic_disk":
        r2 = np.sum(points * points, axis=-1)
        lx = 2.0 * points[..., 0] / (1.0 - r2)
        ly = 2.0 * points[..., 1] / (1.0 - r2)
        return -ly * vectors[..., 0] + lx * vectors[..., 1]
    if surface.kind == "flat_torus":
        return np.zeros(points.shape[:-1])
    raise UnsupportedOperationError("no reference connection for this target")


def azimuthal_winding(surface: SurfaceModel, points: np.ndarray) -> int:
    """Winding number of a loop around the singular axis of the frame.

    Counts full turns of the azimuth along the sample sequence; zero for
    chart targets whose reference frame is globally smooth.
    """
    if not surface.embedded:
        return 0
    points = np.asarray(points, dtype=float)
    phi = np.unwrap(np.arctan2(points[:, 1], points[:, 0]))
    closing = np.arctan2(points[0, 1], points[0, 0])
    # wrap the closing step consistently with the unwrapped sequence
    last = phi[-1]
    delta = (closing - last + np.pi) % (2.0 * np.pi) - np.pi
    total = (last + delta) - phi[0]
    return int(np.rint(total / (2.0 * np.pi)))
