import numpy as np
import pytest

from fourwave.errors import NumericError, ValidationError
from fourwave.volterra import History, trapezoid_weights, volterra_solve


def exp_kernel_memory(dt):
    # K(t, s) = e^{-(t - s)}
    def memory(m, hist, w):
        s = dt * np.arange(m + 1)
        return np.tensordot(w * np.exp(-(m * dt - s)), hist, axes=1)
    return memory


def exact(t):
    r = np.sqrt(3.0) / 2
    return np.exp(-t / 2) * (np.cos(r * t) + np.sin(r * t) / np.sqrt(3.0))


def max_error(dt):
    n = int(round(10.0 / dt))
    h = volterra_solve(exp_kernel_memory(dt), 1.0, n, dt)
    return np.max(np.abs(h.values.real - exact(h.times)))


def test_zero_rhs_is_constant():
    h = volterra_solve(None, np.array([[1.0, 2.0], [3.0, 4.0]]), 50, 0.1)
    assert np.all(h.values == h.values[0])
    assert h.n_steps == 50 and h.times[-1] == pytest.approx(5.0)


def test_trapezoid_weights():
    assert np.array_equal(trapezoid_weights(0, 0.5), [0.0])
    w = trapezoid_weights(4, 0.5)
    assert np.allclose(w, [0.25, 0.5, 0.5, 0.5, 0.25])
    assert w.sum() == pytest.approx(2.0)


def test_source_only_is_trapezoid_integral():
    dt = 0.01
    h = volterra_solve(None, 0.0, 100, dt, source=lambda m: np.cos(m * dt))
    assert abs(h[100] - np.sin(1.0)) < 1e-5


def test_scalar_benchmark_accuracy():
    assert max_error(0.01) < 1e-4


def test_second_order_convergence():
    ratio = max_error(0.02) / max_error(0.01)
    assert 3.5 <= ratio <= 4.5


def test_batched_matches_scalar():
    dt = 0.05
    scalar = volterra_solve(exp_kernel_memory(dt), 1.0, 100, dt).values
    batched = volterra_solve(exp_kernel_memory(dt), np.array([[1.0, 2.0]]), 100, dt).values
    assert np.allclose(batched[:, 0, 0], scalar, rtol=0, atol=1e-15)
    assert np.allclose(batched[:, 0, 1], 2 * scalar, rtol=1e-14)


def test_deterministic():
    a = volterra_solve(exp_kernel_memory(0.01), 1.0, 500, 0.01).values
    b = volterra_solve(exp_kernel_memory(0.01), 1.0, 500, 0.01).values
    assert np.array_equal(a, b)


def test_blow_up_reports_step():
    with pytest.raises(NumericError) as info:
        with np.errstate(invalid="ignore"):
            volterra_solve(None, 1.0, 10, 0.1, source=lambda m: np.inf if m >= 3 else 0.0)
    assert info.value.step == 3


def test_validation():
    with pytest.raises(ValidationError):
        volterra_solve(None, 1.0, 10, 0.0)
    with pytest.raises(ValidationError):
        volterra_solve(None, 1.0, -1, 0.1)


def test_history_indexing():
    h = History(0.5, np.arange(4.0))
    assert h[2] == 2.0 and h.n_steps == 3
