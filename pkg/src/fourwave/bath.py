"""Discrete harmonic baths, linear coupling channels and bath correlation functions.

All frequencies here are angular (rad/fs) and ``beta`` is in fs, so that
``beta * omega`` is the dimensionless ``beta hbar omega``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.interpolate import CubicSpline

from .errors import RangeError, ValidationError
from .units import angular_to_wavenumber, wavenumber_to_angular

COTH_CUTOFF = 50.0


def coth_half(beta: float, omega) -> np.ndarray:
    """coth(beta*omega/2), with coth == 1 once the argument exceeds 50."""
    x = 0.5 * beta * np.asarray(omega, dtype=float)
    with np.errstate(over="ignore"):
        out = np.where(x > COTH_CUTOFF, 1.0, 1.0 / np.tanh(np.minimum(x, COTH_CUTOFF)))
    return out


@dataclass(frozen=True)
class BathSpec:
    frequencies: np.ndarray  # rad/fs, shape (n_modes,)
    beta: float  # fs
    diagonal_couplings: np.ndarray | None = None  # (n_excitons, n_modes)

    def __post_init__(self):
        w = np.array(self.frequencies, dtype=float).reshape(-1)
        if w.size == 0 or np.any(~np.isfinite(w)) or np.any(w <= 0):
            raise ValidationError("mode frequencies must be finite and positive", "bath.modes")
        if not np.isfinite(self.beta) or self.beta <= 0:
            raise ValidationError("beta must be positive", "bath.beta")
        g = self.diagonal_couplings
        if g is not None:
            g = np.array(g, dtype=float)
            if g.ndim == 1:
                g = g[None, :]
            if g.ndim != 2 or g.shape[1] != w.size:
                raise ValidationError(
                    f"diagonal couplings must have {w.size} columns, got shape {g.shape}",
                    "bath.diagonal_couplings",
                )
            if not np.all(np.isfinite(g)):
                raise ValidationError("couplings must be finite", "bath.diagonal_couplings")
            g.setflags(write=False)
        w.setflags(write=False)
        object.__setattr__(self, "frequencies", w)
        object.__setattr__(self, "beta", float(self.beta))
        object.__setattr__(self, "diagonal_couplings", g)

    @property
    def n_modes(self) -> int:
        return self.frequencies.size

    def coth(self) -> np.ndarray:
        return coth_half(self.beta, self.frequencies)

    def for_excitons(self, n_excitons: int, mode: str = "shared") -> "BathSpec":
        """Expand a single coupling row to ``n_excitons`` rows.

        ``shared`` couples every exciton to the same modes; ``independent``
        gives each exciton its own copy of the mode set.
        """
        g = self.diagonal_couplings
        if g is None or g.shape[0] != 1:
            raise ValidationError("expected a single coupling row to expand", "bath.diagonal_couplings")
        if mode == "shared":
            return BathSpec(self.frequencies, self.beta, np.repeat(g, n_excitons, axis=0))
        if mode == "independent":
            m = self.n_modes
            big = np.zeros((n_excitons, n_excitons * m))
            for j in range(n_excitons):
                big[j, j * m:(j + 1) * m] = g[0]
            return BathSpec(np.tile(self.frequencies, n_excitons), self.beta, big)
        raise ValidationError(f"unknown coupling mode {mode!r}", "bath.correlation")

    def scaled(self, s: float) -> "BathSpec":
        return BathSpec(self.frequencies, self.beta, None if self.diagonal_couplings is None else self.diagonal_couplings * s)

    def reorganization_energies(self) -> np.ndarray:
        """sum_n g_{j,n}^2 hbar omega_n for every exciton (rad/fs)."""
        return (self.diagonal_couplings ** 2) @ self.frequencies


@dataclass(frozen=True)
class CouplingChannel:
    """One term A_a (x) B_a of the linear exciton-bath coupling.

    ``operator`` acts in the exciton basis; ``weights`` are the dimensionless
    c_{a,n} in B_a = sum_n hbar omega_n c_{a,n} (b_n + b_n^dagger).
    """

    operator: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        a = np.array(self.operator, dtype=complex)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise ValidationError("channel operator must be square", "bath.channels")
        if np.max(np.abs(a - a.conj().T), initial=0.0) > 1e-12 * max(1.0, np.max(np.abs(a))):
            raise ValidationError("channel operator must be Hermitian", "bath.channels")
        c = np.array(self.weights, dtype=float).reshape(-1)
        if not np.all(np.isfinite(c)):
            raise ValidationError("channel weights must be finite", "bath.channels")
        a.setflags(write=False)
        c.setflags(write=False)
        object.__setattr__(self, "operator", a)
        object.__setattr__(self, "weights", c)


def _weights(channels) -> np.ndarray:
    if len(channels) == 0:
        raise ValidationError("at least one coupling channel is required", "bath.channels")
    return np.array([ch.weights for ch in channels])


def correlation(channels, frequencies, beta: float, t) -> np.ndarray:
    """C_ab(t) = sum_n w_n^2 c_an c_bn [coth(beta w_n/2) cos(w_n t) - i sin(w_n t)].

    Returns an array of shape ``np.shape(t) + (n_channels, n_channels)``.
    """
    if not np.isfinite(beta) or beta <= 0:
        raise ValidationError("beta must be positive", "bath.beta")
    c = _weights(channels)
    w = np.asarray(frequencies, dtype=float)
    t = np.asarray(t, dtype=float)
    if np.any(~np.isfinite(t)):
        raise ValidationError("time arguments must be finite")
    pair = np.einsum("an,bn,n->abn", c, c, w ** 2)
    phase = np.multiply.outer(t, w)
    f = coth_half(beta, w) * np.cos(phase) - 1j * np.sin(phase)
    return np.einsum("...n,abn->...ab", f, pair)


@dataclass(frozen=True)
class CorrelationTable:
    """C_ab(m dt) for m = 0..n_steps, with lookups at negative lags via C_ab(-t) = C_ba(t)^*."""

    dt: float
    values: np.ndarray  # (n_steps + 1, n_ch, n_ch)

    @classmethod
    def build(cls, channels, frequencies, beta: float, dt: float, n_steps: int) -> "CorrelationTable":
        if dt <= 0:
            raise ValidationError("dt must be positive", "grids.dt")
        v = correlation(channels, frequencies, beta, dt * np.arange(n_steps + 1))
        v.setflags(write=False)
        return cls(float(dt), v)

    @property
    def n_steps(self) -> int:
        return self.values.shape[0] - 1

    @property
    def n_channels(self) -> int:
        return self.values.shape[1]

    def lag(self, m) -> np.ndarray:
        """C at integer lags ``m`` (any sign); shape ``np.shape(m) + (n_ch, n_ch)``."""
        m = np.asarray(m)
        if np.any(np.abs(m) > self.n_steps):
            raise RangeError(f"lag {int(np.max(np.abs(m)))} outside table of {self.n_steps} steps")
        pos = self.values[np.abs(m)]
        neg = np.conj(np.swapaxes(pos, -1, -2))
        return np.where((m < 0)[..., None, None], neg, pos)

    def at(self, t) -> np.ndarray:
        """Cubic interpolation of C at arbitrary times inside the table range."""
        t = np.asarray(t, dtype=float)
        tmax = self.n_steps * self.dt
        if np.any(np.abs(t) > tmax * (1 + 1e-12)):
            raise RangeError(f"time {float(np.max(np.abs(t)))} fs outside table range {tmax} fs")
        spline = self._spline()
        pos = spline(np.abs(t))
        neg = np.conj(np.swapaxes(pos, -1, -2))
        return np.where((t < 0)[..., None, None], neg, pos)

    def _spline(self):
        cached = self.__dict__.get("_cached_spline")
        if cached is None:
            grid = self.dt * np.arange(self.n_steps + 1)
            cached = CubicSpline(grid, self.values, axis=0)
            object.__setattr__(self, "_cached_spline", cached)
        return cached


def diagonal_to_channels(bath: BathSpec) -> list[CouplingChannel]:
    """One channel per exciton: A_j = |phi_j><phi_j|, c_{j,n} = g_{j,n}."""
    g = bath.diagonal_couplings
    if g is None:
        raise ValidationError("bath has no diagonal couplings", "bath.diagonal_couplings")
    n = g.shape[0]
    out = []
    for j in range(n):
        a = np.zeros((n, n), dtype=complex)
        a[j, j] = 1.0
        out.append(CouplingChannel(a, g[j]))
    return out


def coupling_matrix(channels, frequencies) -> list[np.ndarray]:
    """Per-mode system operators sum_a omega_n c_{a,n} A_a, i.e. H_eb = sum_n M_n (b_n + b_n^dagger)."""
    w = np.asarray(frequencies, dtype=float)
    c = _weights(channels)
    ops = np.array([ch.operator for ch in channels])
    return list(np.einsum("an,aij->nij", c * w, ops))


# -- spectral densities ----------------------------------------------------

SPECTRAL_MODELS = ("drude-lorentz", "ohmic-exp")


def reorganization_energy(model: str, **params) -> float:
    """Analytic lambda = (1/pi) int_0^inf J(w)/w dw for the supported models (cm^-1)."""
    if model == "drude-lorentz":
        return float(params["reorganization"])
    if model == "ohmic-exp":
        return float(params["eta"]) * float(params["cutoff"]) / np.pi
    raise ValidationError(f"unsupported spectral density {model!r}", "bath.spectral_density.model")


def spectral_density(model: str, omega, **params) -> np.ndarray:
    """J(omega) in cm^-1 for omega in cm^-1."""
    omega = np.asarray(omega, dtype=float)
    if model == "drude-lorentz":
        lam, gam = float(params["reorganization"]), float(params["cutoff"])
        return 2.0 * lam * gam * omega / (omega ** 2 + gam ** 2)
    if model == "ohmic-exp":
        eta, wc = float(params["eta"]), float(params["cutoff"])
        return eta * omega * np.exp(-omega / wc)
    raise ValidationError(f"unsupported spectral density {model!r}", "bath.spectral_density.model")


def _inverse_cumulative(model: str, fraction, **params) -> np.ndarray:
    # frequency at which a given fraction of lambda has accumulated
    fraction = np.asarray(fraction, dtype=float)
    if model == "drude-lorentz":
        return float(params["cutoff"]) * np.tan(0.5 * np.pi * fraction)
    if model == "ohmic-exp":
        return -float(params["cutoff"]) * np.log1p(-fraction)
    raise ValidationError(f"unsupported spectral density {model!r}", "bath.spectral_density.model")


def discretize_spectral_density(model: str, n_modes: int, beta: float, **params) -> BathSpec:
    """Equal-reorganization binning of a continuous spectral density.

    Each of the ``n_modes`` bins carries lambda/n_modes; its mode sits at the
    bin's reorganization midpoint. Parameters (``reorganization``, ``eta``,
    ``cutoff``) are in cm^-1. Returns a single coupling row.
    """
    if model not in SPECTRAL_MODELS:
        raise ValidationError(f"unsupported spectral density {model!r}; expected one of {SPECTRAL_MODELS}",
                              "bath.spectral_density.model")
    if n_modes < 1:
        raise ValidationError("n_modes must be >= 1", "bath.spectral_density.n_modes")
    lam = reorganization_energy(model, **params)
    nu = _inverse_cumulative(model, (np.arange(n_modes) + 0.5) / n_modes, **params)
    g = np.sqrt(lam / (n_modes * nu))
    return BathSpec(wavenumber_to_angular(nu), beta, g[None, :])


def discrete_reorganization_cm(bath: BathSpec) -> np.ndarray:
    """sum_n g_{j,n}^2 nu_n in cm^-1, per coupling row."""
    return (bath.diagonal_couplings ** 2) @ angular_to_wavenumber(bath.frequencies)
