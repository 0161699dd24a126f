import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from fourwave.bath import BathSpec, CouplingChannel
from fourwave.closed_form import evaluate_closed_grid
from fourwave.errors import StateError, ValidationError
from fourwave.exciton import SiteSystem, diagonalize, uniform_projection
from fourwave.oracle import FockOracle, OracleSpec
from fourwave.qme import (KernelContext, _tau_source, chi_qme, dissipator_kernel, dissipator_memory,
                          evaluate_qme_grid, kernel_left, kernel_right)
from fourwave.response import CHANNELS, GridSpec, dipole_product_sum
from fourwave.units import wavenumber_to_angular
from fourwave.volterra import volterra_solve

from test_closed_form import bare_form


def random_hermitian(rng, n):
    a = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    return a + a.conj().T


def general_context(dimer_basis, rng, scale=0.2, dt=2.0, n_steps=60):
    w = wavenumber_to_angular(np.array([120.0, 350.0]))
    ch = [CouplingChannel(random_hermitian(rng, 2), scale * rng.normal(size=2)) for _ in range(2)]
    return KernelContext(dimer_basis, ch, w, 1 / wavenumber_to_angular(208.5), dt, n_steps), ch, w


def zero_context(basis, dt=2.0, n_steps=60):
    bath = BathSpec([0.02, 0.05], 30.0, np.zeros((basis.n, 2)))
    return KernelContext.diagonal(basis, bath, dt, n_steps)


def test_interaction_picture_cache(dimer_basis):
    ctx, ch, _ = general_context(dimer_basis, np.random.default_rng(0))
    assert np.array_equal(ctx.atilde(0), ctx.ops)
    a = ctx.atilde(np.arange(61))
    assert np.max(np.abs(a - np.conj(np.swapaxes(a, -1, -2)))) < 1e-12
    assert np.allclose(ctx.atilde(7), ctx.atilde_at(14.0))
    with pytest.raises(StateError):
        ctx.atilde(61)


@pytest.mark.parametrize("kernel", [kernel_left, kernel_right, dissipator_kernel])
def test_zero_coupling_gives_zero_map(kernel, dimer_basis):
    ctx = zero_context(dimer_basis)
    x = np.array([[1.0, 2.0], [3.0, 4.0]], dtype=complex)
    assert np.all(kernel(10.0, 4.0, ctx, x) == 0)


def test_left_kernel_equal_times(dimer_basis):
    rng = np.random.default_rng(1)
    w = np.array([0.03])
    a = random_hermitian(rng, 2)
    ctx = KernelContext(dimer_basis, [CouplingChannel(a, [0.2])], w, 20.0, 1.0, 20)
    x = rng.normal(size=(2, 2)) + 0j
    t = 6.0
    c0 = ctx.corr(0.0)[0, 0]
    assert c0.imag == 0
    at = ctx.atilde_at(t)[0]
    assert np.allclose(kernel_left(t, t, ctx, x), c0 * at @ at @ x, atol=1e-14)


def test_right_kernel_is_conjugate_of_left_for_identity(dimer_basis):
    a = np.array([[0.7, 0.2], [0.2, -0.4]])
    ctx = KernelContext(dimer_basis, [CouplingChannel(a, [0.3, 0.1])], [0.02, 0.06], 25.0, 1.0, 40)
    eye = np.eye(2, dtype=complex)
    for t, s in [(10.0, 3.0), (30.0, 30.0), (17.0, 0.0)]:
        assert np.allclose(kernel_right(t, s, ctx, eye), kernel_left(t, s, ctx, eye).conj().T, atol=1e-14)


def test_dissipator_identity_structure(dimer_basis):
    a = np.array([[0.7, 0.2], [0.2, -0.4]])
    ctx = KernelContext(dimer_basis, [CouplingChannel(a, [0.3, 0.1])], [0.02, 0.06], 25.0, 1.0, 40)
    t, s = 12.0, 5.0
    at, as_ = ctx.atilde_at(t)[0], ctx.atilde_at(s)[0]
    c = ctx.corr(t - s)[0, 0]
    expected = c * (at @ as_ - as_ @ at) + np.conj(c) * (as_ @ at - at @ as_)
    got = dissipator_kernel(t, s, ctx, np.eye(2, dtype=complex))
    assert np.allclose(got, expected, atol=1e-14)
    assert abs(np.trace(got)) < 1e-14


@given(st.integers(0, 10_000))
def test_dissipator_trace_free(seed):
    rng = np.random.default_rng(seed)
    basis = diagonalize(SiteSystem([12000.0, 12100.0, 12250.0], [[0, 50, 10], [50, 0, 30], [10, 30, 0]],
                                   np.eye(3)))
    w = rng.uniform(0.01, 0.08, 3)
    ch = [CouplingChannel(random_hermitian(rng, 3), rng.normal(0, 0.3, 3)) for _ in range(2)]
    ctx = KernelContext(basis, ch, w, 30.0, 1.0, 50)
    x = rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3))
    t = rng.uniform(0, 50)
    s = rng.uniform(0, t)
    out = dissipator_kernel(t, s, ctx, x)
    assert abs(np.trace(out)) < 1e-12 * max(1.0, np.max(np.abs(out)))


def test_kernel_order_check(dimer_basis):
    ctx = zero_context(dimer_basis)
    with pytest.raises(ValidationError):
        kernel_left(1.0, 2.0, ctx, np.eye(2))


@pytest.mark.parametrize("side", ["left", "right"])
def test_kernels_reproduce_fock_derivative(side, dimer_basis):
    # with tiny coupling the exact reduced dynamics obeys the second-order equation;
    # the residual is set by the finite differences and the trapezoid rule
    w = wavenumber_to_angular(np.array([150.0]))
    beta = 1 / wavenumber_to_angular(208.5)
    ch = [CouplingChannel(np.array([[1.0, 0.5], [0.5, -0.3]]), [1e-3])]
    oracle = FockOracle(dimer_basis, ch, w, beta, uniform_projection(dimer_basis), OracleSpec(30))
    x = np.array([[0.2, 1.0], [0.3, -0.5]], dtype=complex)
    reduced = oracle.reduced_left if side == "left" else oracle.reduced_right
    kernel = kernel_left if side == "left" else kernel_right
    res = []
    for dt in (4.0, 2.0):
        m = int(40.0 / dt)
        ctx = KernelContext(dimer_basis, ch, w, beta, dt, m + 1)
        hist = [reduced(x, k * dt) for k in range(m + 2)]
        deriv = (hist[m + 1] - hist[m - 1]) / (2 * dt)
        wts = np.full(m + 1, dt)
        wts[[0, -1]] *= 0.5
        mem = sum(wts[k] * kernel(m * dt, k * dt, ctx, hist[k]) for k in range(m + 1))
        res.append(np.max(np.abs(deriv + mem)))
        assert res[-1] < 1e-2 * np.max(np.abs(deriv))
    assert 3.5 <= res[0] / res[1] <= 4.5


@pytest.mark.parametrize("k", CHANNELS)
def test_decoupled_limit(k, dimer_basis, dimer_dipoles):
    spec = GridSpec(4.0, 12, 10, (0, 3, 7))
    ctx = zero_context(dimer_basis, spec.dt, spec.max_step)
    chi, hist = chi_qme(k, spec, ctx, dimer_dipoles, keep_histories=True)
    g1 = hist["g1"]
    assert np.max(np.abs(g1 - g1[0])) < 1e-12
    for i, tau in enumerate(spec.tau):
        for p, tp in enumerate(spec.population_times):
            for q, taup in enumerate(spec.tau_prime):
                assert abs(chi[i, p, q] - bare_form(k, tau, tp, taup, dimer_basis, dimer_dipoles)) < 1e-10


@pytest.mark.parametrize("k", CHANNELS)
def test_origin_identity(k, dimer_basis, dimer_bath, dimer_dipoles):
    spec = GridSpec(4.0, 3, 3, (0,))
    ctx = KernelContext.diagonal(dimer_basis, dimer_bath, spec.dt, spec.max_step)
    assert abs(chi_qme(k, spec, ctx, dimer_dipoles)[0, 0, 0] - dipole_product_sum(k, dimer_dipoles)) < 1e-12


def test_channel_four_against_channel_one_when_decoupled():
    # chi4 = e^{iE(tau + tau')} and chi1 = e^{iE(tau - tau')}: conjugates on the tau = 0 plane,
    # related by e^{2iE tau} elsewhere
    basis = diagonalize(SiteSystem([12050.0], [[0.0]], [[1.0, 0.0, 0.0]], reference_energy=12000.0))
    d = uniform_projection(basis)
    spec = GridSpec(3.0, 8, 8, (0, 5))
    ctx = zero_context(basis, spec.dt, spec.max_step)
    chi1, chi4 = chi_qme(1, spec, ctx, d), chi_qme(4, spec, ctx, d)
    assert np.max(np.abs(chi4[0] - np.conj(chi1[0]))) < 1e-12
    shift = np.exp(2j * basis.omega[0] * spec.tau)[:, None, None]
    assert np.max(np.abs(chi4 - np.conj(chi1) * shift)) < 1e-12


def test_population_operator_stays_hermitian(dimer_basis, dimer_bath):
    ctx = KernelContext.diagonal(dimer_basis, dimer_bath, 2.0, 60)
    x0 = np.array([[0.6, 0.2 - 0.1j], [0.2 + 0.1j, 0.4]])
    h = volterra_solve(dissipator_memory(ctx), x0[None], 60, 2.0).values[:, 0]
    assert np.max(np.abs(h - np.conj(np.swapaxes(h, -1, -2)))) < 1e-10
    assert np.max(np.abs(np.trace(h, axis1=1, axis2=2) - 1.0)) < 1e-12
    assert np.max(np.abs(h - x0)) > 1e-4  # it did evolve


def test_source_vanishes_without_coherence_time(dimer_basis, dimer_bath):
    spec = GridSpec(2.0, 5, 4, (0, 2))
    ctx = KernelContext.diagonal(dimer_basis, dimer_bath, spec.dt, spec.max_step)
    v = np.ones((4, 4, 2, 2, 2), dtype=complex)
    w = _tau_source(ctx, v, spec, conj=False)
    assert np.all(w[:, :, 0] == 0)
    assert np.any(w[:, :, 1] != 0)
    zero = zero_context(dimer_basis, spec.dt, spec.max_step)
    assert np.all(_tau_source(zero, v, spec, conj=True) == 0)


@pytest.mark.parametrize("k", CHANNELS)
def test_weak_coupling_matches_closed_form(k, dimer_basis, dimer_dipoles, room_beta):
    w = wavenumber_to_angular(np.array([100.0, 300.0]))
    spec = GridSpec(2.0, 24, 24, (0, 10))
    devs = []
    for hr in (0.005, 0.00125):
        bath = BathSpec(w, room_beta, np.sqrt(hr / 2) * np.array([[1.0, 1.0], [1.2, 0.7]]))
        closed = evaluate_closed_grid(spec, dimer_basis, bath, dimer_dipoles, (k,))[k]
        ctx = KernelContext.diagonal(dimer_basis, bath, spec.dt, spec.max_step)
        devs.append(np.max(np.abs(chi_qme(k, spec, ctx, dimer_dipoles) - closed)) / np.max(np.abs(closed)))
    assert devs[0] < 0.01
    assert 8 <= devs[0] / devs[1] <= 32


def test_general_coupling_against_oracle(dimer_basis, dimer_dipoles):
    # off-diagonal channels: the deviation from exact dynamics is the O(g^4) truncation
    spec = GridSpec(4.0, 10, 10, (0, 5))
    beta = 1 / wavenumber_to_angular(208.5)
    devs = []
    for scale in (0.03, 0.015):
        ctx, ch, w = general_context(dimer_basis, np.random.default_rng(5), scale, spec.dt, spec.max_step)
        ref = FockOracle(dimer_basis, ch, w, beta, dimer_dipoles, OracleSpec((14, 10))).grid(spec)
        qme = evaluate_qme_grid(spec, ctx, dimer_dipoles)
        devs.append(np.array([np.max(np.abs(qme[k] - ref[k])) / np.max(np.abs(ref[k])) for k in CHANNELS]))
    assert np.all(devs[1] < 1e-3)
    ratio = devs[0] / devs[1]
    assert np.all((ratio >= 8) & (ratio <= 32))


def test_grid_refinement_order(dimer_basis, dimer_bath, dimer_dipoles):
    res = []
    for f in (1, 2, 4):
        dt = 8.0 / f
        n = int(48.0 / dt) + 1
        spec = GridSpec(dt, n, n, (0, 2 * f))
        ctx = KernelContext.diagonal(dimer_basis, dimer_bath, dt, spec.max_step)
        res.append(chi_qme(3, spec, ctx, dimer_dipoles)[::f, :, ::f])
    order = np.log2(np.max(np.abs(res[0] - res[1])) / np.max(np.abs(res[1] - res[2])))
    assert 1.8 <= order <= 2.2


def test_errors(dimer_basis, dimer_bath, dimer_dipoles):
    spec = GridSpec(2.0, 8, 8, (0, 4))
    short = KernelContext.diagonal(dimer_basis, dimer_bath, 2.0, 10)
    with pytest.raises(StateError):
        chi_qme(1, spec, short, dimer_dipoles)
    other = KernelContext.diagonal(dimer_basis, dimer_bath, 1.0, 40)
    with pytest.raises(ValidationError):
        chi_qme(1, spec, other, dimer_dipoles)
    with pytest.raises(ValidationError):
        chi_qme(0, spec, other, dimer_dipoles)
    with pytest.raises(ValidationError):
        KernelContext(dimer_basis, [], [0.1], 1.0, 1.0, 5)
