"""Periodic spectral grids and FFT utilities.

All fields in the package live on uniform grids with trigonometric
(spectral) differentiation along the first axis.  Three grid kinds are
supported:

* ``circle``: the loop domain, period 1, nodes j/n.
* ``line``: a truncated line [-L, L) treated as periodic with period 2L;
  meaningful only for data that decays inside the padding region.
* ``torus``: period 2*pi in x, the normalization used by the dispersive
  estimates (single Fourier modes are then doubly periodic in space-time).

Mode numbers are the integers m in [-n/2, n/2); the wavenumber of mode m
is 2*pi*m/period.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ResolutionError

_KINDS = ("circle", "line", "torus")


@dataclass(frozen=True)
class SpectralGrid:
    """Uniform periodic grid with spectral differentiation."""

    n: int
    kind: str = "circle"
    half_width: float = 0.0

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise ValueError(f"unknown grid kind {self.kind!r}")
        if self.n < 4 or self.n % 2:
            raise ResolutionError(f"grid size must be even and >= 4, got {self.n}")
        if self.kind == "line" and self.half_width <= 0:
            raise ValueError("line grids need a positive half_width")

    @property
    def period(self) -> float:
        if self.kind == "circle":
            return 1.0
        if self.kind == "torus":
            return 2.0 * np.pi
        return 2.0 * self.half_width

    @property
    def dx(self) -> float:
        return self.period / self.n

    @property
    def nodes(self) -> np.ndarray:
        x = np.arange(self.n) * self.dx
        if self.kind == "line":
            return x - self.half_width
        return x

    @property
    def modes(self) -> np.ndarray:
        """Integer mode numbers in FFT layout."""
        return np.fft.fftfreq(self.n, d=1.0 / self.n)

    @property
    def wavenumbers(self) -> np.ndarray:
        return 2.0 * np.pi * self.modes / self.period

    # -- differentiation and quadrature ------------------------------------

    def derivative(self, values: np.ndarray, order: int = 1) -> np.ndarray:
        """Spectral d^order/dx^order along axis 0."""
        vhat = np.fft.fft(values, axis=0)
        k = self.wavenumbers
        if order % 2:
            k = k.copy()
            k[self.n // 2] = 0.0  # drop the unpaired Nyquist mode
        factor = (1j * k) ** order
        vhat *= factor.reshape((-1,) + (1,) * (values.ndim - 1))
        out = np.fft.ifft(vhat, axis=0)
        return out.real if np.isrealobj(values) else out

    def integrate(self, values: np.ndarray) -> np.ndarray:
        """Integral over one period (exact for band-limited data)."""
        return values.mean(axis=0) * self.period

    def cumulative_integral(self, values: np.ndarray) -> np.ndarray:
        """F(x_j) = integral from node 0 to node j, F(0) = 0.

        Computed spectrally: the mean contributes a linear ramp, the rest a
        periodic antiderivative, so accuracy matches the differentiation.
        """
        mean = values.mean(axis=0)
        vhat = np.fft.fft(values - mean, axis=0)
        k = self.wavenumbers.copy()
        k[0] = 1.0  # mode 0 already removed
        k[self.n // 2] = 1.0  # Nyquist has no smooth antiderivative
        fac = 1.0 / (1j * k)
        fac[0] = 0.0
        fac[self.n // 2] = 0.0  # zeroed along with mode 0
        anti = np.fft.ifft(vhat * fac.reshape((-1,) + (1,) * (values.ndim - 1)), axis=0)
        if np.isrealobj(values):
            anti = anti.real
        x = (np.arange(self.n) * self.dx).reshape((-1,) + (1,) * (values.ndim - 1))
        return anti - anti[0] + mean * x

    # -- resampling ---------------------------------------------------------

    def upsample(self, values: np.ndarray, factor: int = 2) -> np.ndarray:
        """Trigonometric interpolation onto a factor-times finer grid.

        Existing node values are preserved exactly; new nodes interleave.
        """
        if factor < 1:
            raise ValueError("factor must be >= 1")
        if factor == 1:
            return values.copy()
        n = self.n
        vhat = np.fft.fft(values, axis=0)
        m = n * factor
        out = np.zeros((m,) + values.shape[1:], dtype=complex)
        half = n // 2
        out[:half] = vhat[:half]
        # split the Nyquist coefficient symmetrically to keep real data real
        out[half] = 0.5 * vhat[half]
        out[m - half] = 0.5 * vhat[half]
        out[m - half + 1:] = vhat[half + 1:]
        res = np.fft.ifft(out, axis=0) * factor
        return res.real if np.isrealobj(values) else res

    def shift(self, values: np.ndarray, s: float) -> np.ndarray:
        """Circularly resample: returns g with g(x) = f(x - s).

        When s is an integer number of grid cells the shift is a bit-exact
        sample rotation.
        """
        cells = s / self.dx
        rounded = np.rint(cells)
        if abs(cells - rounded) < 1e-12 * max(1.0, abs(cells)):
            return np.roll(values, int(rounded), axis=0)
        vhat = np.fft.fft(values, axis=0)
        phase = np.exp(-1j * self.wavenumbers * s)
        out = np.fft.ifft(vhat * phase.reshape((-1,) + (1,) * (values.ndim - 1)), axis=0)
        return out.real if np.isrealobj(values) else out
