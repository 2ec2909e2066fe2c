"""Target-manifold tests: metrics, curvature, charts, parallel transport.

Expected values come from closed forms (round-sphere curvature, classical
rotation angle 2*pi*(1-cos(alpha)) of a latitude circle) or from oracles
built independently of the implementation: a 4th-order chart-Laplacian for
the warped curvature, centered differences of the chart metric for the
Christoffel symbols, and a fine-step transport integrator driven by the
analytic path formula.
"""

import numpy as np
import pytest

from smflow import geometry as geo
from smflow.errors import (
    OffManifoldError,
    SingularChartError,
    UnsupportedOperationError,
)
from smflow.spectral import SpectralGrid


def latitude_loop(n, alpha, radius=1.0):
    x = np.arange(n) / n
    return radius * np.stack(
        [
            np.sin(alpha) * np.cos(2 * np.pi * x),
            np.sin(alpha) * np.sin(2 * np.pi * x),
            np.full(n, np.cos(alpha)),
        ],
        axis=-1,
    )


def latitude_tangent(n, alpha, radius=1.0):
    x = np.arange(n) / n
    return (
        2
        * np.pi
        * radius
        * np.stack(
            [
                -np.sin(alpha) * np.sin(2 * np.pi * x),
                np.sin(alpha) * np.cos(2 * np.pi * x),
                np.zeros(n),
            ],
            axis=-1,
        )
    )


@pytest.fixture(scope="module")
def bump_sphere():
    warp, grad = geo.bump_warp(0.3, 0.6, center=(0.6, 0.0, 0.8))
    return geo.warped_sphere(warp, grad)


# -- curvature ----------------------------------------------------------------


def test_round_sphere_curvature_scaling():
    for r in (1.0, 2.0, 0.5):
        s = geo.round_sphere(r)
        p = s.project_point(np.array([0.3, -1.2, 0.4]))
        assert geo.curvature_at(s, p) == pytest.approx(1.0 / r**2, rel=1e-14)


def test_hyperbolic_and_torus_curvature():
    q = np.array([[0.2, 0.1], [0.0, 0.0], [-0.4, 0.3]])
    assert np.allclose(geo.curvature_at(geo.hyperbolic_disk(), q), -1.0)
    assert np.allclose(geo.curvature_at(geo.flat_torus(), q), 0.0)


def test_curvature_rejects_off_manifold_points():
    s = geo.round_sphere()
    with pytest.raises(OffManifoldError):
        geo.curvature_at(s, np.array([1.0 + 1e-6, 0.0, 0.0]))
    with pytest.raises(OffManifoldError):
        geo.curvature_at(geo.hyperbolic_disk(), np.array([1.2, 0.0]))


def _chart_laplacian_oracle(warp, th, ph):
    """Laplace-Beltrami of warp on the unit sphere: 4th order in colatitude,
    spectral in longitude, using the colatitude-longitude chart formula."""
    TH, PH = np.meshgrid(th, ph, indexing="ij")
    P = np.stack(
        [np.sin(TH) * np.cos(PH), np.sin(TH) * np.sin(PH), np.cos(TH)], axis=-1
    )
    lam = np.asarray(warp(P))
    dth = th[1] - th[0]

    def d_dth(f):
        out = np.empty_like(f)
        out[2:-2] = (-f[4:] + 8 * f[3:-1] - 8 * f[1:-3] + f[:-4]) / (12 * dth)
        out[:2] = np.nan
        out[-2:] = np.nan
        return out

    nph = ph.size
    m = np.fft.fftfreq(nph, d=1.0 / nph)
    d2ph = np.fft.ifft(-(m**2) * np.fft.fft(lam, axis=1), axis=1).real
    term1 = d_dth(np.sin(TH) * d_dth(lam)) / np.sin(TH)
    return lam, term1 + d2ph / np.sin(TH) ** 2, P


def test_warped_curvature_matches_chart_laplacian_oracle(bump_sphere):
    th = np.linspace(0.3, np.pi - 0.3, 1201)
    ph = np.linspace(0.0, 2 * np.pi, 256, endpoint=False)
    lam, lap, P = _chart_laplacian_oracle(bump_sphere.warp, th, ph)
    K_oracle = np.exp(-2 * lam) * (1.0 - lap)
    K_impl = bump_sphere.gaussian_curvature(P)
    sl = slice(4, -4)
    rel = np.abs(K_impl[sl] - K_oracle[sl]) / np.abs(K_oracle[sl])
    assert np.nanmax(rel) < 1e-6


def test_curvature_gradient_consistent_with_chain_rule(bump_sphere):
    n = 256
    loop = latitude_loop(n, 1.1)
    ux = latitude_tangent(n, 1.1)
    grid = SpectralGrid(n)
    dk_spectral = grid.derivative(bump_sphere.gaussian_curvature(loop))
    dk_grad = np.sum(bump_sphere.curvature_gradient(loop) * ux, axis=-1)
    scale = np.abs(dk_spectral).max()
    assert scale > 0.1  # the case must be genuinely varying
    assert np.abs(dk_spectral - dk_grad).max() < 1e-4 * scale


# -- metric compatibility -------------------------------------------------------


def test_J_is_isometric_and_squares_to_minus_one(bump_sphere):
    rng = np.random.default_rng(7)
    surfaces = [
        geo.round_sphere(1.7),
        bump_sphere,
        geo.hyperbolic_disk(),
        geo.flat_torus(),
        geo.product_surface(geo.round_sphere(), geo.round_sphere(2.0)),
    ]
    for s in surfaces:
        if s.kind == "hyperbolic_disk":
            p = 0.8 * (rng.random((1000, 2)) - 0.5)
        elif s.kind == "flat_torus":
            p = rng.random((1000, 2))
        else:
            p = s.project_point(rng.normal(size=(1000, s.point_dim)))
        v = s.tangent_project(p, rng.normal(size=p.shape))
        w = s.tangent_project(p, rng.normal(size=p.shape))
        jv, jw = s.apply_J(p, v), s.apply_J(p, w)
        assert np.abs(s.metric(p, jv, jw) - s.metric(p, v, w)).max() < 1e-10
        assert np.abs(s.apply_J(p, jv) + v).max() < 1e-12


def test_tangent_projection_is_idempotent_orthogonal():
    s = geo.round_sphere()
    rng = np.random.default_rng(3)
    p = s.project_point(rng.normal(size=(100, 3)))
    w = rng.normal(size=(100, 3))
    t = geo.project_tangent(s, p, w)
    assert np.abs(np.sum(t * p, axis=-1)).max() < 1e-12
    assert np.abs(geo.project_tangent(s, p, t) - t).max() < 1e-14
    with pytest.raises(UnsupportedOperationError):
        geo.project_tangent(geo.flat_torus(), np.zeros(2), np.ones(2))


# -- christoffel symbols --------------------------------------------------------


def _christoffel_fd_oracle(surface, q, eps=1e-5):
    """Gamma^k_ij = 0.5 g^{kl} (d_i g_jl + d_j g_il - d_l g_ij) with centered
    differences of the chart metric."""
    q = np.asarray(q, dtype=float)
    dg = np.zeros((2, 2, 2))
    for l in range(2):
        dq = np.zeros(2)
        dq[l] = eps
        dg[l] = (geo.chart_metric(surface, q + dq) - geo.chart_metric(surface, q - dq)) / (
            2 * eps
        )
    g_inv = np.linalg.inv(geo.chart_metric(surface, q))
    gam = np.zeros((2, 2, 2))
    for k in range(2):
        for i in range(2):
            for j in range(2):
                gam[k, i, j] = 0.5 * np.sum(
                    g_inv[k] * (dg[i][j] + dg[j][i] - dg[:, i, j])
                )
    return gam


def test_round_sphere_christoffel_closed_form():
    s = geo.round_sphere(2.0)
    th = 1.1
    gam = geo.christoffel_at(s, np.array([th, 0.7]))
    assert gam[0, 1, 1] == pytest.approx(-np.sin(th) * np.cos(th), abs=1e-14)
    assert gam[1, 0, 1] == pytest.approx(np.cos(th) / np.sin(th), abs=1e-14)
    assert gam[1, 1, 0] == gam[1, 0, 1]
    assert np.abs(gam).sum() == pytest.approx(
        abs(gam[0, 1, 1]) + 2 * abs(gam[1, 0, 1]), abs=1e-14
    )


def test_christoffel_matches_fd_of_metric_oracle(bump_sphere):
    cases = [
        (geo.round_sphere(1.3), np.array([0.9, 2.0])),
        (bump_sphere, np.array([1.2, 0.4])),
        (geo.hyperbolic_disk(), np.array([0.3, -0.2])),
        (geo.flat_torus(), np.array([0.6, 0.1])),
    ]
    for surface, q in cases:
        gam = geo.christoffel_at(surface, q)
        oracle = _christoffel_fd_oracle(surface, q)
        assert np.abs(gam - oracle).max() < 1e-8


def test_christoffel_rejects_polar_chart_points():
    with pytest.raises(SingularChartError):
        geo.christoffel_at(geo.round_sphere(), np.array([1e-9, 0.0]))
    with pytest.raises(SingularChartError):
        geo.christoffel_at(geo.round_sphere(), np.array([np.pi, 0.0]))


# -- parallel transport ---------------------------------------------------------


def _fine_ode_transport_oracle(alpha, samples):
    """Transport around a latitude circle by brute-force small-step RK4 on
    the analytic path; independent of the package integrator."""
    v = np.array([np.cos(alpha), 0.0, -np.sin(alpha)])  # southward unit tangent
    h = 1.0 / samples

    def u(x):
        return np.array(
            [
                np.sin(alpha) * np.cos(2 * np.pi * x),
                np.sin(alpha) * np.sin(2 * np.pi * x),
                np.cos(alpha),
            ]
        )

    def du(x):
        return (
            2
            * np.pi
            * np.array(
                [
                    -np.sin(alpha) * np.sin(2 * np.pi * x),
                    np.sin(alpha) * np.cos(2 * np.pi * x),
                    0.0,
                ]
            )
        )

    def f(x, v):
        return -np.dot(v, du(x)) * u(x)

    x = 0.0
    for _ in range(samples):
        k1 = f(x, v)
        k2 = f(x + h / 2, v + h / 2 * k1)
        k3 = f(x + h / 2, v + h / 2 * k2)
        k4 = f(x + h, v + h * k3)
        v = v + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        x += h
    return v


def test_equator_transport_is_identity_within_tolerance():
    s = geo.round_sphere()
    loop = latitude_loop(512, np.pi / 2)
    v0 = geo.TangentVector(loop[0], np.array([0.0, 1.0, 0.0]))
    v1 = geo.parallel_transport(s, loop, v0, closed=True)
    assert np.linalg.norm(v1.components - v0.components) < 1e-6


def test_latitude_transport_rotation_matches_classical_angle():
    s = geo.round_sphere()
    alpha = np.pi / 3
    loop = latitude_loop(512, alpha)
    e1, e2, e1w, _ = geo.loop_frame(s, loop)
    ang = np.arctan2(np.dot(e1w, e2[0]), np.dot(e1w, e1[0]))
    expected = 2 * np.pi * (1 - np.cos(alpha))  # = pi, self-conjugate branch
    assert min(abs(ang - expected), abs(ang + expected)) < 1e-6


def test_latitude_transport_against_fine_ode_oracle():
    s = geo.round_sphere()
    alpha = np.pi / 3
    loop = latitude_loop(512, alpha)
    v0c = np.array([np.cos(alpha), 0.0, -np.sin(alpha)])
    v1 = geo.parallel_transport(s, loop, geo.TangentVector(loop[0], v0c), closed=True)
    oracle = _fine_ode_transport_oracle(alpha, 8192)
    assert np.linalg.norm(v1.components - oracle) < 1e-6


def test_transport_preserves_metric_and_commutes_with_J(bump_sphere):
    for s in (geo.round_sphere(1.5), bump_sphere):
        loop = latitude_loop(128, 1.0, radius=s.radius)
        rng = np.random.default_rng(11)
        w = s.tangent_project(loop[0], rng.normal(size=3))
        v0 = geo.TangentVector(loop[0], w)
        jv0 = geo.TangentVector(loop[0], s.apply_J(loop[0], w))
        v1 = geo.parallel_transport(s, loop, v0, closed=True)
        jv1 = geo.parallel_transport(s, loop, jv0, closed=True)
        h0 = s.metric(loop[0], w, w)
        h1 = s.metric(loop[0], v1.components, v1.components)
        assert abs(h1 - h0) < 1e-10 * max(1.0, h0)
        assert np.abs(jv1.components - s.apply_J(loop[0], v1.components)).max() < 1e-10


def test_transport_richardson_factor(bump_sphere):
    alpha = 1.1

    def angle(n):
        loop = latitude_loop(n, alpha)
        e1, e2, e1w, _ = geo.loop_frame(bump_sphere, loop)
        return np.arctan2(
            bump_sphere.metric(loop[0], e1w, e2[0]),
            bump_sphere.metric(loop[0], e1w, e1[0]),
        )

    ref = angle(4096)
    errs = [abs(angle(n) - ref) for n in (32, 64, 128)]
    assert errs[0] / errs[1] > 3.5
    assert errs[1] / errs[2] > 3.5


def test_open_path_transport_matches_closed_route():
    s = geo.round_sphere()
    n = 256
    loop = latitude_loop(n, 0.9)
    path = np.vstack([loop, loop[:1]])  # explicit open representation
    w = s.tangent_project(loop[0], np.array([0.3, -0.2, 0.8]))
    closed = geo.parallel_transport(s, loop, geo.TangentVector(loop[0], w), closed=True)
    opened = geo.parallel_transport(s, path, geo.TangentVector(loop[0], w))
    assert np.linalg.norm(closed.components - opened.components) < 1e-5


def test_product_transport_is_blockwise():
    s2 = geo.round_sphere()
    prod = geo.product_surface(s2, s2)
    n = 128
    loop_a = latitude_loop(n, 0.8)
    loop_b = latitude_loop(n, 1.2)
    loop = np.hstack([loop_a, loop_b])
    w = np.hstack(
        [
            s2.tangent_project(loop_a[0], np.array([0.1, 0.4, -0.3])),
            s2.tangent_project(loop_b[0], np.array([-0.2, 0.5, 0.1])),
        ]
    )
    res = geo.parallel_transport(prod, loop, geo.TangentVector(loop[0], w), closed=True)
    res_a = geo.parallel_transport(
        s2, loop_a, geo.TangentVector(loop_a[0], w[:3]), closed=True
    )
    res_b = geo.parallel_transport(
        s2, loop_b, geo.TangentVector(loop_b[0], w[3:]), closed=True
    )
    assert np.allclose(res.components, np.hstack([res_a.components, res_b.components]))


# -- reference frames -----------------------------------------------------------


def test_reference_connection_reproduces_latitude_holonomy(bump_sphere):
    n = 512
    for s, alpha in ((geo.round_sphere(), np.pi / 3), (bump_sphere, 1.0)):
        loop = latitude_loop(n, alpha)
        ux = latitude_tangent(n, alpha)
        beta = geo.reference_connection(s, loop, ux)
        theta = -beta.mean() + 2 * np.pi * geo.azimuthal_winding(s, loop)
        e1, e2, e1w, _ = geo.loop_frame(s, loop)
        ang = np.arctan2(
            s.metric(loop[0], e1w, e2[0]), s.metric(loop[0], e1w, e1[0])
        )
        diff = (theta - ang + np.pi) % (2 * np.pi) - np.pi
        assert abs(diff) < 1e-8


def test_reference_frame_rejects_polar_loops():
    s = geo.round_sphere()
    pts = latitude_loop(64, 1e-8)
    with pytest.raises(SingularChartError):
        geo.reference_frame(s, pts)


def test_azimuthal_winding_counts_turns():
    s = geo.round_sphere()
    x = np.arange(128) / 128.0
    double = np.stack(
        [
            np.sin(1.0) * np.cos(4 * np.pi * x),
            np.sin(1.0) * np.sin(4 * np.pi * x),
            np.full(128, np.cos(1.0)),
        ],
        axis=-1,
    )
    assert geo.azimuthal_winding(s, latitude_loop(128, 0.7)) == 1
    assert geo.azimuthal_winding(s, double) == 2
    assert geo.azimuthal_winding(s, latitude_loop(128, 0.7)[:, :]) == 1
