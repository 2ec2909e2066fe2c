"""Direct flow tests against closed-form solutions.

Latitude circles of colatitude alpha precess rigidly about the vertical
axis with angular velocity 4*pi^2*cos(alpha); the equator and constant
maps are stationary; on the flat torus the flow is the free Schrodinger
equation, so a single Fourier mode just rotates its phase at rate k^2.
"""

import numpy as np
import pytest

from smflow import flow_direct as fd
from smflow import geometry as geo
from smflow.errors import ConfigError, RejectedStepError
from smflow.spectral import SpectralGrid


def make_state(kind="latitude", n=64, surface=None, **params):
    surface = surface or geo.round_sphere()
    return fd.initial_loop(surface, SpectralGrid(n), kind, **params)


def rotation_z(angle):
    c, s = np.cos(angle), np.sin(angle)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


# -- energy and tension anchors ---------------------------------------------------


def test_great_circle_energy():
    state = make_state("great_circle", n=128)
    assert fd.energy(state) == pytest.approx(2 * np.pi**2, rel=1e-12)
    assert fd.gradient_norm(state) == pytest.approx(2 * np.pi, rel=1e-12)


def test_latitude_energy_and_tension_magnitude():
    alpha = 1.0
    state = make_state("latitude", n=128, alpha=alpha)
    assert fd.energy(state) == pytest.approx(
        2 * np.pi**2 * np.sin(alpha) ** 2, rel=1e-11
    )
    tau = fd.tension(state)
    mag = np.linalg.norm(tau, axis=-1)
    expected = 4 * np.pi**2 * np.sin(alpha) * abs(np.cos(alpha))
    assert np.abs(mag - expected).max() < 1e-8 * expected


def test_radius_scales_energy():
    state = make_state("great_circle", n=64, surface=geo.round_sphere(2.0))
    assert fd.energy(state) == pytest.approx(8 * np.pi**2, rel=1e-12)


def test_flow_velocity_is_tangent():
    for surface in (geo.round_sphere(), geo.warped_sphere(*geo.bump_warp(0.2, 0.5))):
        state = make_state("perturbed_latitude", n=64, surface=surface, alpha=1.0, eps=0.1, m=2)
        vel = fd.flow_rhs(state)
        assert np.abs(np.sum(vel * state.points, axis=-1)).max() < 1e-10


# -- stationary solutions ----------------------------------------------------------


def test_constant_map_is_stationary():
    state = make_state("constant", n=16, point=[0.3, 0.4, 0.9])
    out = fd.evolve(state, fd.admissible_dt(state), 5)
    assert np.abs(out.points - state.points).max() < 1e-14


def test_equator_is_stationary():
    state = make_state("great_circle", n=32)
    out = fd.evolve(state, fd.admissible_dt(state), 20)
    assert np.abs(out.points - state.points).max() < 1e-12


# -- precession ---------------------------------------------------------------------


def test_latitude_precession_angle_and_direction():
    alpha = np.pi / 3
    state = make_state("latitude", n=64, alpha=alpha)
    dt = fd.admissible_dt(state)
    n_steps = 200
    out = fd.evolve(state, dt, n_steps)
    omega = 4 * np.pi**2 * np.cos(alpha)
    expected = state.points @ rotation_z(omega * out.time).T
    assert omega > 0  # northern latitude precesses counterclockwise
    assert np.abs(out.points - expected).max() < 1e-9
    assert out.time == pytest.approx(n_steps * dt)


def test_southern_latitude_precesses_clockwise():
    alpha = 2 * np.pi / 3
    state = make_state("latitude", n=64, alpha=alpha)
    out = fd.evolve(state, fd.admissible_dt(state), 100)
    omega = 4 * np.pi**2 * np.cos(alpha)
    expected = state.points @ rotation_z(omega * out.time).T
    assert omega < 0
    assert np.abs(out.points - expected).max() < 1e-9


# -- conservation and reversibility ---------------------------------------------------


def test_energy_conserved_generic_loop():
    state = make_state("perturbed_latitude", n=64, alpha=np.pi / 3, eps=0.05, m=2)
    e0 = fd.energy(state)
    drift = []
    fd.evolve(state, fd.admissible_dt(state), 300, observer=lambda s: drift.append(abs(fd.energy(s) - e0)))
    assert max(drift) < 1e-10 * e0


def test_energy_conserved_on_warped_sphere():
    surface = geo.warped_sphere(*geo.bump_warp(0.3, 0.6, center=(0.6, 0.0, 0.8)))
    state = make_state("perturbed_latitude", n=64, surface=surface, alpha=1.0, eps=0.05, m=2)
    e0 = fd.energy(state)
    out = fd.evolve(state, fd.admissible_dt(state), 200)
    assert abs(fd.energy(out) - e0) < 1e-8 * e0


def test_forward_backward_reversibility():
    state = make_state("perturbed_latitude", n=64, alpha=1.0, eps=0.1, m=3)
    dt = fd.admissible_dt(state)
    fwd = fd.evolve(state, dt, 100)
    back = fd.evolve(fwd, -dt, 100)
    # backward RK4 is not the exact inverse, residual is O(dt^5) per step
    assert np.abs(back.points - state.points).max() < 1e-9


# -- step control -----------------------------------------------------------------


def test_oversized_step_is_rejected_with_admissible_value():
    state = make_state("latitude", n=32)
    limit = fd.admissible_dt(state)
    with pytest.raises(RejectedStepError) as exc:
        fd.step(state, 10 * limit)
    assert exc.value.admissible_dt == pytest.approx(limit)
    assert exc.value.dt == pytest.approx(10 * limit)


def test_zero_step_returns_fresh_copy():
    state = make_state("latitude", n=16)
    out = fd.step(state, 0.0)
    assert out is not state
    assert out.points is not state.points
    assert np.array_equal(out.points, state.points)
    assert out.time == state.time


def test_state_shape_validation():
    with pytest.raises(ConfigError):
        fd.LoopState(SpectralGrid(8), geo.round_sphere(), np.zeros((8, 2)))
    with pytest.raises(ConfigError):
        fd.initial_loop(geo.round_sphere(), SpectralGrid(8), "no_such_kind")


# -- chart targets ------------------------------------------------------------------


def test_flat_torus_flow_is_free_schrodinger():
    surface = geo.flat_torus()
    grid = SpectralGrid(32, kind="torus")
    a = 0.2
    state = fd.initial_loop(surface, grid, "fourier", coeffs=[(1, a, a)])
    w0 = state.points[:, 0] + 1j * state.points[:, 1]
    k = 2 * np.pi / grid.period
    assert np.abs(w0 - a * np.exp(1j * k * grid.nodes)).max() < 1e-14
    dt = fd.admissible_dt(state)
    out = fd.evolve(state, dt, 50)
    w = out.points[:, 0] + 1j * out.points[:, 1]
    exact = a * np.exp(1j * (k * grid.nodes + k**2 * out.time))
    assert np.abs(w - exact).max() < 1e-10


def test_hyperbolic_disk_flow_conserves_energy():
    surface = geo.hyperbolic_disk()
    grid = SpectralGrid(32)
    state = fd.initial_loop(
        surface, grid, "fourier", coeffs=[(1, 0.15, 0.1)], offset=[0.05, 0.0]
    )
    e0 = fd.energy(state)
    out = fd.evolve(state, fd.admissible_dt(state), 100)
    surface.validate_points(out.points)
    assert abs(fd.energy(out) - e0) < 1e-9 * e0
