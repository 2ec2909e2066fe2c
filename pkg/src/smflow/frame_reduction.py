"""Parallel frames along evolving loops and the reduction of the map flow
to a nonlinear Schrodinger equation for the frame coefficients.

A metric-parallel J-adapted frame (e1, e2) along a loop u turns the
derivative u_x into one complex coefficient Phi = h(u_x, e1) + i h(u_x, e2)
and the map flow u_t = -J tau(u) into a cubic Schrodinger equation for
Phi. On a circle the frame fails to close by the holonomy angle theta, so
Phi is twisted-periodic, Phi(x + 1) = e^{-i theta} Phi(x); multiplying by
e^{i theta x} restores periodicity at the cost of a first-order term with
coefficient theta and a linear-in-x potential x * theta_t. Only the
combination of that ramp with the curvature tail is periodic across the
seam, which is what the assembled potential uses.

Potential bookkeeping (gauge: frame transported from the base node, seed
kept time-parallel at the base). With K the Gaussian curvature along the
loop, S(x) = -K |Phi|^2 / 2 and r(x) = (K o u)_x |Phi|^2 / 2 with
primitive R(x) = int_0^x r, the coefficient satisfies

    i Phi_t = Phi_xx - V Phi,    V = S - S(0) + R,

and V(x + 1) = V(x) + oint r with oint r = -theta_t, exactly the jump the
twist demands. The letters split V into a pointwise part S, its mean W, a
mean-free tail T = R - mean(R) + (oint r)/2 and a constant remainder Q so
that Q + S - W + T = V identically.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from . import flow_direct as fd
from .errors import (
    ConfigError,
    InconsistentHolonomyError,
    ResolutionError,
    UnsupportedCombinationError,
    UnsupportedOperationError,
)
from .flow_direct import LoopState
from .geometry import SurfaceModel, _covariant_rhs, loop_frame
from .holonomy import (
    holonomy_ode,
    holonomy_rate,
    lift_to_branch,
    swept_angle_increment,
)
from .nls_solver import ComplexField, split_step
from .spectral import SpectralGrid


# -- frames ----------------------------------------------------------------------


@dataclass(frozen=True)
class FrameField:
    """Parallel J-adapted frame along one loop, plus its once-around wrap."""

    surface: SurfaceModel
    grid: SpectralGrid
    points: np.ndarray
    e1: np.ndarray
    e2: np.ndarray
    e1_wrap: np.ndarray
    e2_wrap: np.ndarray
    base_index: int = 0

    def orthonormality_defect(self) -> float:
        h = self.surface.metric
        p = self.points
        worst = max(
            np.abs(h(p, self.e1, self.e1) - 1.0).max(),
            np.abs(h(p, self.e2, self.e2) - 1.0).max(),
            np.abs(h(p, self.e1, self.e2)).max(),
        )
        return float(worst)

    def j_defect(self) -> float:
        j_e1 = self.surface.apply_J(self.points, self.e1)
        return float(np.abs(j_e1 - self.e2).max())

    def transport_angle(self) -> float:
        """Rotation from the base frame to its once-around transport."""
        p = self.points[self.base_index]
        h = self.surface.metric
        return float(
            np.arctan2(h(p, self.e1_wrap, self.e2[self.base_index]),
                       h(p, self.e1_wrap, self.e1[self.base_index]))
        )


def parallel_frame(surface: SurfaceModel, loop: LoopState, seed=None,
                   base_index: int = 0) -> FrameField:
    """Metric-parallel frame along the loop, transported from base_index.

    The default seed is the normalized loop direction at the base node.
    The frame is smooth along the transport path; the holonomy mismatch
    sits between the wrap values and the base values.
    """
    if surface.kind == "product":
        raise UnsupportedOperationError(
            "parallel frames are scalar-gauge only; use product_integral "
            "for matrix-valued connections"
        )
    if loop.grid.n < 16:
        raise ResolutionError("frame transport needs at least 16 loop samples")
    pts = loop.points
    if base_index % loop.grid.n:
        pts = np.roll(pts, -base_index, axis=0)
    e1, e2, e1w, e2w = loop_frame(surface, pts, seed=seed)
    if base_index % loop.grid.n:
        e1 = np.roll(e1, base_index, axis=0)
        e2 = np.roll(e2, base_index, axis=0)
    return FrameField(surface, loop.grid, loop.points, e1, e2, e1w, e2w,
                      base_index=base_index % loop.grid.n)


# -- coefficients ------------------------------------------------------------------


@dataclass
class FrameCoefficients:
    """Loop derivative expressed in a parallel frame.

    ``a`` holds the two real coefficients (h(u_x, e1), h(u_x, e2)) per
    node; ``phi`` is the complex combination a1 + i a2, twisted-periodic
    on a circle. ``phi_wrap`` is the coefficient of u_x at the base node
    against the once-around transported frame, i.e. the continuation value
    of phi at base + period. ``untwisted`` and ``theta_used`` are filled
    in by :func:`untwist`.
    """

    grid: SpectralGrid
    a: np.ndarray
    phi: np.ndarray
    phi_wrap: complex
    base_index: int = 0
    untwisted: np.ndarray | None = None
    theta_used: float | None = None

    def velocity_coefficients(self, theta: float | None = None) -> np.ndarray:
        """Complex coefficients of u_t in the same frame: b = -i Phi_x.

        Phi is twisted-periodic on a circle, so its derivative is taken
        through the periodic representation e^{i theta x} Phi using the
        recorded (or supplied) twist angle; theta = 0 recovers the plain
        spectral derivative for line or untwisted data.
        """
        if theta is None:
            theta = self.theta_used or 0.0
        x = self.grid.nodes
        periodic = np.exp(1j * theta * x) * self.phi
        dphi = np.exp(-1j * theta * x) * (
            self.grid.derivative(periodic) - 1j * theta * periodic
        )
        return -1j * dphi

    def norm_identity_defect(self, surface: SurfaceModel, loop: LoopState) -> float:
        ux = loop.grid.derivative(loop.points)
        speed2 = surface.metric(loop.points, ux, ux)
        return float(np.abs(np.sum(self.a**2, axis=-1) - speed2).max())


def coefficients(loop: LoopState, frame: FrameField) -> FrameCoefficients:
    """Frame coefficients of u_x, including the wrap continuation value."""
    h = frame.surface.metric
    ux = loop.grid.derivative(loop.points)
    a1 = h(loop.points, ux, frame.e1)
    a2 = h(loop.points, ux, frame.e2)
    a = np.stack([a1, a2], axis=-1)
    b = frame.base_index
    pw = frame.points[b]
    phi_wrap = complex(h(pw, ux[b], frame.e1_wrap), h(pw, ux[b], frame.e2_wrap))
    return FrameCoefficients(loop.grid, a, a1 + 1j * a2, phi_wrap, base_index=b)


def twisted_residual(coeffs: FrameCoefficients, theta: float) -> float:
    """Relative defect of the twist relation phi(base + period) =
    e^{-i theta} phi(base)."""
    scale = np.abs(coeffs.phi).max()
    if scale == 0.0:
        return 0.0
    predicted = np.exp(-1j * theta) * coeffs.phi[coeffs.base_index]
    return float(abs(coeffs.phi_wrap - predicted) / scale)


def untwist(coeffs: FrameCoefficients, theta: float,
            residual_tol: float = 1e-6) -> np.ndarray:
    """phi = e^{i theta x} Phi, periodic when theta matches the twist.

    Records the angle used on the coefficients and rejects angles whose
    twist relation fails by more than residual_tol (relative).
    """
    res = twisted_residual(coeffs, theta)
    if res > residual_tol:
        raise InconsistentHolonomyError(
            f"twist angle residual {res:.3e} exceeds {residual_tol:.1e}; "
            "the supplied theta does not match the frame holonomy"
        )
    out = np.exp(1j * theta * coeffs.grid.nodes) * coeffs.phi
    coeffs.untwisted = out
    coeffs.theta_used = float(theta)
    return out


# -- curvature potentials -----------------------------------------------------------


@dataclass(frozen=True)
class NonlinearTerms:
    """Letters of the reduced potential: pointwise S, its mean W, the
    mean-free curvature tail T, and the constant remainder Q, with
    Q + S - W + T equal to the gauge potential of the base-node frame."""

    S: np.ndarray
    T: np.ndarray
    W: float
    Q: float
    domain: str = "circle"

    def potential(self) -> np.ndarray:
        return self.Q + self.S - self.W + self.T


def gauge_potential(surface: SurfaceModel, loop: LoopState,
                    coeffs: FrameCoefficients) -> np.ndarray:
    """V with i Phi_t = Phi_xx - V Phi in the base-node parallel gauge.

    V = S - S(base) + tail, where the tail integrates the curvature-rate
    density r = (K o u)_x |Phi|^2 / 2 along the transport path from the
    base node (wrapping past the seam for nodes before the base)."""
    grid = loop.grid
    K = surface.gaussian_curvature(loop.points)
    amp2 = np.abs(coeffs.phi) ** 2
    S = -0.5 * K * amp2
    r = grid.derivative(K) * amp2 * 0.5
    R = grid.cumulative_integral(r)
    b = coeffs.base_index
    tail = R - R[b]
    if b:
        tail[:b] += grid.integrate(r)
    return S - S[b] + tail


def nonlinear_terms(surface: SurfaceModel, loop: LoopState,
                    coeffs: FrameCoefficients, domain: str = "circle",
                    decay_tol: float = 1e-6) -> NonlinearTerms:
    """Curvature potential letters for the reduced equation.

    Circle: S(x) = -K|Phi|^2/2, W = mean(S), T = R - mean(R) + (oint r)/2
    with R the primitive of r = (K o u)_x |Phi|^2 / 2, and Q the constant
    making Q + S - W + T the base-node gauge potential.

    Line: T is the raw tail integrated from the left edge and W = Q = 0;
    the coefficients must decay at the edges (relative decay_tol).
    """
    if surface.kind == "product":
        raise UnsupportedOperationError(
            "curvature letters are defined for one complex direction"
        )
    if domain not in ("circle", "line"):
        raise ConfigError([f"unknown reduction domain {domain!r}"])
    grid = loop.grid
    K = surface.gaussian_curvature(loop.points)
    amp2 = np.abs(coeffs.phi) ** 2
    S = -0.5 * K * amp2
    r = grid.derivative(K) * amp2 * 0.5
    R = grid.cumulative_integral(r)
    if domain == "line":
        edge = max(2, grid.n // 16)
        scale = np.abs(coeffs.phi).max()
        edge_amp = max(np.abs(coeffs.phi[:edge]).max(),
                       np.abs(coeffs.phi[-edge:]).max())
        if scale > 0 and edge_amp > decay_tol * scale:
            raise ConfigError(
                [
                    "line-domain reduction requires the coefficients to decay "
                    f"at the edges: relative edge amplitude {edge_amp / scale:.3e} "
                    f"exceeds {decay_tol:.1e}"
                ]
            )
        return NonlinearTerms(S=S, T=R, W=0.0, Q=0.0, domain="line")
    total = grid.integrate(r)
    mean_R = float(np.mean(R))
    b = coeffs.base_index
    T = R - mean_R + 0.5 * total
    W = float(np.mean(S))
    # Q + S - W + T = S - S[b] + (R - R[b]): the unwrapped base-b gauge
    # potential; the wrapped variant (gauge_potential) differs by the
    # constant oint r on the pre-base arc, the same multivaluedness the
    # twist tracks.
    Q = float(W - S[b] + mean_R - R[b] - 0.5 * total)
    return NonlinearTerms(S=S, T=T, W=W, Q=Q, domain="circle")


def assemble_nls_rhs(grid: SpectralGrid, values: np.ndarray,
                     terms: NonlinearTerms, theta: float = 0.0,
                     theta_rate: float = 0.0, domain: str = "circle",
                     variable_metric=None) -> np.ndarray:
    """Right side F of i phi_t = phi_xx + F for the reduced equation.

    Circle (periodic gauge field phi): F = -2 i theta phi_x
    - (theta^2 + x theta_rate + Q + S - W + T) phi, with variable metrics
    unsupported (the change of variables that removes the first-order term
    is specific to the flat circle).

    Line (coefficients Phi): F = -(S + T) Phi; with variable_metric alpha
    (an array of metric values on the nodes) the dispersive part becomes
    alpha Phi_xx + (3 alpha_x / 2) Phi_x + (alpha_xx / 2) Phi, reported
    relative to the constant-coefficient left side:
    F = (alpha - 1) Phi_xx + (3 alpha_x / 2) Phi_x + (alpha_xx / 2) Phi
    - (S + T) Phi.
    """
    if domain == "circle":
        if variable_metric is not None:
            raise UnsupportedCombinationError(
                "variable metrics are only reduced on the line; the twisted "
                "circle change of variables requires a constant metric"
            )
        pot = theta**2 + grid.nodes * theta_rate + terms.potential()
        return -2j * theta * grid.derivative(values) - pot * values
    if domain == "line":
        out = -(terms.S + terms.T) * values
        if variable_metric is not None:
            alpha = np.asarray(variable_metric, dtype=float)
            ax = grid.derivative(alpha)
            axx = grid.derivative(alpha, order=2)
            vxx = grid.derivative(values, order=2)
            vx = grid.derivative(values)
            out = out + (alpha - 1.0) * vxx + 1.5 * ax * vx + 0.5 * axx * values
        return out
    raise ConfigError([f"unknown reduction domain {domain!r}"])


def spacetime_shift(grid: SpectralGrid, history: np.ndarray,
                    times: np.ndarray, thetas: np.ndarray) -> np.ndarray:
    """Remove the first-order drift: psi(t, y) = phi(t, y + 2 int_0^t theta).

    The running integral of theta uses the trapezoid rule on the supplied
    times; each slice is resampled trigonometrically (bit-exact rolls when
    the shift lands on grid nodes).
    """
    history = np.asarray(history)
    times = np.asarray(times, dtype=float)
    thetas = np.asarray(thetas, dtype=float)
    if history.shape[0] != times.size or times.size != thetas.size:
        raise ConfigError(["history, times and thetas must align"])
    drift = np.concatenate(
        [[0.0], np.cumsum(0.5 * (thetas[1:] + thetas[:-1]) * np.diff(times))]
    )
    out = np.empty_like(history, dtype=complex)
    for k in range(times.size):
        out[k] = grid.shift(history[k], -2.0 * drift[k])
    return out


# -- coupled evolution ---------------------------------------------------------------


def _step_with_seed(state: LoopState, dt: float, seed: np.ndarray):
    """One flow step plus parallel transport of the base-node seed vector
    along the base point's trajectory, sharing the RK4 stages."""
    new_state = fd.step(state, dt)  # validates dt and handles projection
    s = state.surface
    u = state.points
    b = 0

    def rhs(pts):
        return fd.flow_rhs(replace(state, points=pts))

    k1 = rhs(u)
    u2 = u + 0.5 * dt * k1
    k2 = rhs(u2)
    u3 = u + 0.5 * dt * k2
    k3 = rhs(u3)
    u4 = u + dt * k3
    k4 = rhs(u4)
    w = np.asarray(seed, dtype=float)
    g1 = _covariant_rhs(s, u[b], dt * k1[b], w)
    g2 = _covariant_rhs(s, u2[b], dt * k2[b], w + 0.5 * g1)
    g3 = _covariant_rhs(s, u3[b], dt * k3[b], w + 0.5 * g2)
    g4 = _covariant_rhs(s, u4[b], dt * k4[b], w + g3)
    w = w + (g1 + 2.0 * g2 + 2.0 * g3 + g4) / 6.0
    p_new = new_state.points[b]
    w = s.tangent_project(p_new, w)
    w = w / np.sqrt(s.metric(p_new, w, w))
    return new_state, w


def solver_tolerance(grid: SpectralGrid, dt: float) -> float:
    """Accuracy model of the coupled run: spatial transport and holonomy
    quadratures contribute O(dx^4), the splitting O(dt^2)."""
    return 100.0 * grid.dx**4 + 10.0 * dt**2


@dataclass
class ReducedRunResult:
    """Time series of a coupled flow/NLS run."""

    times: np.ndarray
    theta: np.ndarray
    theta_gb: np.ndarray
    theta_rate: np.ndarray
    energy: np.ndarray
    grad_norm: np.ndarray
    phi_frame: np.ndarray
    phi_nls: np.ndarray
    coeffs_history: np.ndarray
    twist_residual_ode: np.ndarray
    phi_closure: np.ndarray
    sup_error: np.ndarray
    l4_window: np.ndarray
    tolerance: float
    final_state: LoopState
    final_seed: np.ndarray

    @property
    def max_sup_error(self) -> float:
        return float(self.sup_error.max())


def _windowed_l4(grid: SpectralGrid, history, times, k, window: int) -> float:
    lo = max(0, k + 1 - window)
    block = np.abs(history[lo:k + 1]) ** 4
    duration = times[k] - times[lo]
    if duration <= 0.0:
        duration = 1.0
    return float((duration * grid.period * np.mean(block)) ** 0.25)


def coupled_evolve(state0: LoopState, dt: float, n_steps: int,
                   domain: str = "circle", seed=None,
                   l4_window: int = 32, observer=None) -> ReducedRunResult:
    """March the map flow and the reduced NLS side by side.

    Each step advances the loop by one RK4 flow step, transports the frame
    seed in time along the base trajectory, rebuilds the parallel frame and
    its coefficients, and advances the gauge field phi by one split step of
    the assembled equation with the same dt. Records both routes to phi,
    holonomy angles by transport/sweep/rate, and the cross-formulation
    error.
    """
    if domain not in ("circle", "line"):
        raise ConfigError([f"unknown reduction domain {domain!r}"])
    surface, grid = state0.surface, state0.grid
    circle = domain == "circle"

    frame = parallel_frame(surface, state0, seed=seed)
    w1 = frame.e1[0]
    coeffs = coefficients(state0, frame)
    terms = nonlinear_terms(surface, state0, coeffs, domain=domain)
    if circle:
        theta_now = lift_to_branch(frame.transport_angle(),
                                   holonomy_ode(surface, grid, state0.points))
        rate_now = holonomy_rate(surface, grid, state0.points)
        phi_now = untwist(coeffs, theta_now)
    else:
        theta_now, rate_now = 0.0, 0.0
        phi_now = coeffs.phi.copy()

    m = n_steps
    times = np.empty(m + 1)
    theta = np.empty(m + 1)
    theta_gb = np.empty(m + 1)
    theta_rate = np.empty(m + 1)
    energy = np.empty(m + 1)
    grad_norm = np.empty(m + 1)
    phi_frame = np.empty((m + 1, grid.n), dtype=complex)
    phi_nls = np.empty((m + 1, grid.n), dtype=complex)
    coeffs_hist = np.empty((m + 1, grid.n), dtype=complex)
    resid_ode = np.empty(m + 1)
    closure = np.empty(m + 1)
    sup_err = np.empty(m + 1)
    l4 = np.empty(m + 1)

    state = state0
    nls = ComplexField(grid, phi_now)

    def record(k, state, coeffs, phi_f, theta_k, rate_k, gb_k):
        times[k] = state.time
        theta[k] = theta_k
        theta_gb[k] = gb_k
        theta_rate[k] = rate_k
        energy[k] = fd.energy(state)
        grad_norm[k] = fd.gradient_norm(state)
        phi_frame[k] = phi_f
        phi_nls[k] = nls.values
        coeffs_hist[k] = coeffs.phi
        if circle:
            resid_ode[k] = twisted_residual(
                coeffs, holonomy_ode(surface, grid, state.points))
            closure[k] = abs(np.exp(1j * theta_k * grid.period) * coeffs.phi_wrap
                             - phi_f[0]) / max(np.abs(phi_f).max(), 1e-300)
        else:
            edge = max(2, grid.n // 16)
            scale = max(np.abs(coeffs.phi).max(), 1e-300)
            resid_ode[k] = max(np.abs(coeffs.phi[:edge]).max(),
                               np.abs(coeffs.phi[-edge:]).max()) / scale
            closure[k] = resid_ode[k]
        sup_err[k] = np.abs(nls.values - phi_f).max()
        l4[k] = _windowed_l4(grid, phi_nls[:k + 1], times[:k + 1], k, l4_window)
        if observer is not None:
            observer(k, state, coeffs)

    record(0, state, coeffs, phi_now, theta_now, rate_now, theta_now)
    gb = theta_now

    for k in range(1, m + 1):
        pot_now = (grid.nodes * rate_now + terms.potential()) if circle \
            else (terms.S + terms.T)
        prev_points = state.points
        state, w1 = _step_with_seed(state, dt, w1)
        frame = parallel_frame(surface, state, seed=w1)
        w1 = frame.e1[0]
        coeffs = coefficients(state, frame)
        terms = nonlinear_terms(surface, state, coeffs, domain=domain)
        if circle:
            theta_next = lift_to_branch(frame.transport_angle(), theta_now)
            rate_next = holonomy_rate(surface, grid, state.points)
            phi_next = untwist(coeffs, theta_next)
            gb = gb + swept_angle_increment(surface, grid, prev_points,
                                            state.points, dt)
            pot_next = grid.nodes * rate_next + terms.potential()
            theta_mid = 0.5 * (theta_now + theta_next)
        else:
            theta_next, rate_next = 0.0, 0.0
            phi_next = coeffs.phi.copy()
            pot_next = terms.S + terms.T
            theta_mid = 0.0

        t_now = state.time - dt

        def potential(vals, t, a=pot_now, b_=pot_next, tm=t_now):
            return a if abs(t - tm) < 0.25 * abs(dt) else b_

        nls = split_step(nls, dt, potential=potential, theta=theta_mid, t0=t_now)
        theta_now, rate_now = theta_next, rate_next
        record(k, state, coeffs, phi_next, theta_now, rate_now, gb)

    return ReducedRunResult(
        times=times, theta=theta, theta_gb=theta_gb, theta_rate=theta_rate,
        energy=energy, grad_norm=grad_norm, phi_frame=phi_frame,
        phi_nls=phi_nls, coeffs_history=coeffs_hist,
        twist_residual_ode=resid_ode, phi_closure=closure, sup_error=sup_err,
        l4_window=l4, tolerance=solver_tolerance(grid, dt),
        final_state=state, final_seed=w1,
    )


# -- reconstruction and the autonomous driver ----------------------------------------


def reconstruct_loop(surface: SurfaceModel, grid: SpectralGrid,
                     phi: np.ndarray, base_point: np.ndarray,
                     e1_base: np.ndarray, theta: float = 0.0):
    """Rebuild loop points and frame from the gauge field by x-integration.

    Solves u' = a1 e1 + a2 e2, nabla_x e1 = 0 from the base point with
    Phi = e^{-i theta x} phi, using one RK4 stage per grid cell with
    trigonometrically interpolated midpoint coefficients. Returns
    (points, e1, e2, closure) where closure is the once-around endpoint
    defect (O(dx^4) for smooth data).
    """
    if surface.kind == "product" or not surface.embedded:
        raise UnsupportedOperationError(
            "loop reconstruction is implemented for embedded sphere targets"
        )
    # interpolate the periodic gauge field, then untwist pointwise (the
    # twisted coefficients themselves are not grid-periodic)
    fine_phi = grid.upsample(np.asarray(phi, dtype=complex), 2)
    x_fine = grid.nodes[0] + 0.5 * grid.dx * np.arange(2 * grid.n)
    fine = np.exp(-1j * theta * x_fine) * fine_phi
    Phi = fine[0::2]
    mids = fine[1::2]
    wrap_value = np.exp(-1j * theta * grid.period) * Phi[0]
    dx = grid.dx
    n = grid.n
    pts = np.empty((n, surface.point_dim))
    e1s = np.empty_like(pts)
    u = surface.project_point(np.asarray(base_point, dtype=float))
    w = surface.tangent_project(u, np.asarray(e1_base, dtype=float))
    w = w / np.sqrt(surface.metric(u, w, w))

    def vel(point, e1v, coeff):
        e2v = surface.apply_J(point, e1v)
        return coeff.real * e1v + coeff.imag * e2v

    for j in range(n):
        pts[j] = u
        e1s[j] = w
        c0, cm = Phi[j], mids[j]
        c1 = Phi[j + 1] if j + 1 < n else wrap_value
        k1 = dx * vel(u, w, c0)
        h1 = _covariant_rhs(surface, u, k1, w)
        um = u + 0.5 * k1
        k2 = dx * vel(um, w + 0.5 * h1, cm)
        h2 = _covariant_rhs(surface, um, k2, w + 0.5 * h1)
        um2 = u + 0.5 * k2
        k3 = dx * vel(um2, w + 0.5 * h2, cm)
        h3 = _covariant_rhs(surface, um2, k3, w + 0.5 * h2)
        ue = u + k3
        k4 = dx * vel(ue, w + h3, c1)
        h4 = _covariant_rhs(surface, ue, k4, w + h3)
        u = surface.project_point(u + (k1 + 2 * k2 + 2 * k3 + k4) / 6.0)
        w = w + (h1 + 2 * h2 + 2 * h3 + h4) / 6.0
        w = surface.tangent_project(u, w)
        w = w / np.sqrt(surface.metric(u, w, w))
    closure = float(np.linalg.norm(u - pts[0]))
    e2s = surface.apply_J(pts, e1s)
    return pts, e1s, e2s, closure


@dataclass
class AutonomousState:
    """State of the self-contained gauge-field evolution (experimental)."""

    grid: SpectralGrid
    phi: np.ndarray
    base_point: np.ndarray
    e1_base: np.ndarray
    theta: float
    time: float = 0.0


def autonomous_evolve(surface: SurfaceModel, state: AutonomousState,
                      dt: float, n_steps: int):
    """Evolve phi without re-deriving it from a stored loop (experimental).

    Each step reconstructs the loop from (phi, base data, theta), builds
    the curvature potential, advances phi by a predictor/corrector split
    step, and moves the base point and seed with the flow velocity read
    off the gauge field (u_t = b1 e1 + b2 e2 with b = -i Phi_x at the
    base). Second order in dt on top of the O(dx^4) reconstruction.
    """
    grid = state.grid
    x = grid.nodes

    def snapshot(st):
        pts, e1s, e2s, closure = reconstruct_loop(
            surface, grid, st.phi, st.base_point, st.e1_base, st.theta)
        Phi = np.exp(-1j * st.theta * x) * st.phi
        K = surface.gaussian_curvature(pts)
        amp2 = np.abs(Phi) ** 2
        S = -0.5 * K * amp2
        r = grid.derivative(K) * amp2 * 0.5
        R = grid.cumulative_integral(r)
        rate = holonomy_rate(surface, grid, pts)
        pot = x * rate + (S - S[0] + R)
        Phi_x = np.exp(-1j * st.theta * x) * (grid.derivative(st.phi)
                                              - 1j * st.theta * st.phi)
        b = -1j * Phi_x[0]
        e2b = surface.apply_J(st.base_point, st.e1_base)
        u_t = b.real * st.e1_base + b.imag * e2b
        return pts, pot, rate, u_t, closure

    for _ in range(n_steps):
        pts, pot0, rate0, ut0, _ = snapshot(state)
        field = ComplexField(grid, state.phi)
        # predictor: freeze the potential and base data
        pred = split_step(field, dt, potential=lambda v, t: pot0,
                          theta=state.theta, t0=state.time)
        base_pred = surface.project_point(state.base_point + dt * ut0)
        h1 = _covariant_rhs(surface, state.base_point, dt * ut0, state.e1_base)
        seed_pred = state.e1_base + h1
        seed_pred = surface.tangent_project(base_pred, seed_pred)
        seed_pred = seed_pred / np.sqrt(surface.metric(base_pred, seed_pred, seed_pred))
        st_pred = AutonomousState(grid, pred.values, base_pred, seed_pred,
                                  state.theta + dt * rate0, state.time + dt)
        _, pot1, rate1, ut1, _ = snapshot(st_pred)
        # corrector: trapezoid in the potential, base velocity, and rate
        theta_mid = state.theta + 0.25 * dt * (rate0 + rate1)

        def potential(vals, t, a=pot0, b_=pot1, tm=state.time):
            return a if abs(t - tm) < 0.25 * abs(dt) else b_

        corr = split_step(field, dt, potential=potential, theta=theta_mid,
                          t0=state.time)
        base_new = surface.project_point(
            state.base_point + 0.5 * dt * (ut0 + ut1))
        g1 = _covariant_rhs(surface, state.base_point,
                            0.5 * dt * (ut0 + ut1), state.e1_base)
        seed_new = state.e1_base + g1
        seed_new = surface.tangent_project(base_new, seed_new)
        seed_new = seed_new / np.sqrt(surface.metric(base_new, seed_new, seed_new))
        state = AutonomousState(grid, corr.values, base_new, seed_new,
                                state.theta + 0.5 * dt * (rate0 + rate1),
                                state.time + dt)
    return state
