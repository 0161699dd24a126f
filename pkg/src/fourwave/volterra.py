"""Integrator for dX/dt = I(t) - int_0^t K(t, s) X(s) ds on a uniform grid.

The memory integral uses trapezoid weights and each step is an Euler predictor
followed by a trapezoid corrector (PECE), which is second-order accurate.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import NumericError, ValidationError


@dataclass
class History:
    """Samples X(m dt), m = 0..n_steps, stacked on the first axis."""

    dt: float
    values: np.ndarray

    @property
    def n_steps(self) -> int:
        return self.values.shape[0] - 1

    @property
    def times(self) -> np.ndarray:
        return self.dt * np.arange(self.values.shape[0])

    def __getitem__(self, m):
        return self.values[m]


def trapezoid_weights(m: int, dt: float) -> np.ndarray:
    """Weights of the composite trapezoid rule on m+1 points spanning [0, m dt]."""
    w = np.full(m + 1, dt)
    if m == 0:
        return np.zeros(1)
    w[0] = w[-1] = 0.5 * dt
    return w


# memory(m, history, weights) -> sum_k weights[k] K(t_m, t_k) history[k], with history of length m+1
MemoryFn = Callable[[int, np.ndarray, np.ndarray], np.ndarray]


def volterra_solve(memory: MemoryFn | None, initial, n_steps: int, dt: float,
                   source: Callable[[int], np.ndarray] | None = None) -> History:
    """Solve on t_m = m dt, m = 0..n_steps. ``initial`` may carry any trailing shape
    (a batch of matrices, for instance); ``memory`` and ``source`` must return that shape."""
    if dt <= 0 or not np.isfinite(dt):
        raise ValidationError("dt must be positive")
    if n_steps < 0:
        raise ValidationError("n_steps must be >= 0")
    x0 = np.asarray(initial)
    dtype = complex if (memory is not None or source is not None or np.iscomplexobj(x0)) else float
    hist = np.empty((n_steps + 1,) + x0.shape, dtype=dtype)
    hist[0] = x0

    def rhs(m):
        out = np.zeros(x0.shape, dtype=hist.dtype)
        if source is not None:
            out = out + source(m)
        if memory is not None and m > 0:
            out = out - memory(m, hist[:m + 1], trapezoid_weights(m, dt))
        return out

    f_now = rhs(0)
    for m in range(n_steps):
        hist[m + 1] = hist[m] + dt * f_now
        f_pred = rhs(m + 1)
        hist[m + 1] = hist[m] + 0.5 * dt * (f_now + f_pred)
        if not np.all(np.isfinite(hist[m + 1])):
            raise NumericError("non-finite value during Volterra stepping", step=m + 1)
        f_now = rhs(m + 1)
    return History(float(dt), hist)
