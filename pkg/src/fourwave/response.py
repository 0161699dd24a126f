"""Grids of third-order response functions."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ResourceError, ValidationError

CHANNELS = (1, 2, 3, 4)
DEFAULT_MEMORY_CAP = 2 * 1024 ** 3


@dataclass(frozen=True)
class GridSpec:
    """Uniform tau and tau' axes starting at 0; population times as integer multiples of dt."""

    dt: float
    n_tau: int
    n_tau_prime: int
    population_steps: tuple[int, ...] = (0,)

    def __post_init__(self):
        if not np.isfinite(self.dt) or self.dt <= 0:
            raise ValidationError("dt must be positive", "grids.dt")
        if self.n_tau < 1 or self.n_tau_prime < 1:
            raise ValidationError("axis lengths must be >= 1", "grids")
        steps = tuple(int(p) for p in self.population_steps)
        if not steps or min(steps) < 0:
            raise ValidationError("population times must be non-negative", "grids.population_times")
        object.__setattr__(self, "population_steps", steps)

    @classmethod
    def from_times(cls, dt, n_tau, n_tau_prime, population_times) -> "GridSpec":
        """Map population times (fs) to the nearest grid step."""
        steps = tuple(int(round(t / dt)) for t in population_times)
        return cls(dt, n_tau, n_tau_prime, steps)

    @property
    def tau(self) -> np.ndarray:
        return self.dt * np.arange(self.n_tau)

    @property
    def tau_prime(self) -> np.ndarray:
        return self.dt * np.arange(self.n_tau_prime)

    @property
    def population_times(self) -> np.ndarray:
        return self.dt * np.array(self.population_steps, dtype=float)

    @property
    def shape(self) -> tuple[int, int, int]:
        return (self.n_tau, len(self.population_steps), self.n_tau_prime)

    @property
    def max_step(self) -> int:
        return self.n_tau - 1 + max(self.population_steps) + self.n_tau_prime - 1

    def check_memory(self, n_arrays: int, bytes_per_point: int = 16, cap: int = DEFAULT_MEMORY_CAP, extra: int = 0):
        need = int(np.prod(self.shape)) * n_arrays * bytes_per_point + extra
        if need > cap:
            raise ResourceError(f"estimated memory {need} bytes exceeds cap {cap} bytes")
        return need


@dataclass(frozen=True)
class ResponseGrid:
    """chi^(k)(tau, T_p, tau') sampled on a GridSpec; ``values[k]`` has shape spec.shape."""

    spec: GridSpec
    values: dict = field(default_factory=dict)
    provenance: str = "closed"

    def __post_init__(self):
        if self.provenance not in ("closed", "qme", "oracle"):
            raise ValidationError(f"unknown provenance {self.provenance!r}")
        for k, v in self.values.items():
            if k not in CHANNELS:
                raise ValidationError(f"channel {k} not in 1..4")
            if v.shape != self.spec.shape:
                raise ValidationError(f"channel {k} has shape {v.shape}, expected {self.spec.shape}")

    def __getitem__(self, k: int) -> np.ndarray:
        return self.values[k]

    @property
    def channels(self) -> tuple[int, ...]:
        return tuple(sorted(self.values))

    def scaled(self, s) -> "ResponseGrid":
        return ResponseGrid(self.spec, {k: v * s for k, v in self.values.items()}, self.provenance)


def dipole_product_sum(k: int, dipoles) -> complex:
    """chi^(k)(0, 0, 0): the channel's dipole-product double sum."""
    d1, d2, d3, d4 = (dipoles[a] for a in (1, 2, 3, 4))
    pairs = {
        1: (d2, d1, d3, d4),
        2: (d3, d1, d2, d4),
        3: (d3, d2, d1, d4),
        4: (d1, d2, d3, d4),
    }
    if k not in pairs:
        raise ValidationError(f"channel {k} not in 1..4")
    a, b, c, d = pairs[k]
    return complex(np.sum(np.conj(a) * b) * np.sum(np.conj(c) * d))
