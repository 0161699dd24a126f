import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from fourwave.bath import BathSpec
from fourwave.closed_form import chi_closed, displacement_trace, evaluate_closed_grid, polaron_shifted_energies
from fourwave.errors import ResourceError, ValidationError
from fourwave.exciton import SiteSystem, diagonalize, project_dipoles, uniform_projection
from fourwave.oracle import FockOracle, OracleSpec, fock_displacement_trace
from fourwave.response import CHANNELS, GridSpec, dipole_product_sum

times = st.floats(-200, 200)

# Fock-space values (cutoffs 50 and 21) for the dimer fixture at 300 K
FOCK_REFERENCE = {
    1: ((20.0, 30.0, 40.0), 0.18319362145363036 - 0.2902049364495654j),
    2: ((12.0, 60.0, 8.0), 0.5307642911069689 + 0.08662263776645021j),
    3: ((44.0, 0.0, 24.0), 0.18901605537488353 - 0.23043050225149866j),
    4: ((36.0, 16.0, 52.0), -0.07228716300512378 + 0.5169909344852458j),
}


def bare_form(k, tau, tp, taup, basis, d):
    # g = 0: pure exciton phases with the channel's dipole labels
    e = basis.omega
    labels = {1: (2, 1, 3, 4), 2: (3, 1, 2, 4), 3: (3, 2, 1, 4), 4: (1, 2, 3, 4)}[k]
    out = 0j
    for j in range(basis.n):
        for jp in range(basis.n):
            pref = np.conj(d[labels[0]][j]) * d[labels[1]][j] * np.conj(d[labels[2]][jp]) * d[labels[3]][jp]
            ph = {1: e[jp] * tau - e[j] * taup,
                  2: -e[j] * (tp + taup) + e[jp] * (tau + tp),
                  3: -e[j] * tp + e[jp] * (tau + tp + taup),
                  4: e[j] * taup + e[jp] * tau}[k]
            out += pref * np.exp(1j * ph)
    return out


def test_displacement_trace_trivial_limits():
    w = np.array([0.02, 0.05])
    assert displacement_trace([0, 0], [0, 0], 1.0, 2.0, 3.0, 4.0, 10.0, w) == 1
    val = displacement_trace([0.3, 0.1], [0.2, 0.4], 7.0, 7.0, -3.0, -3.0, 10.0, w)
    assert abs(val - 1) < 1e-15


@pytest.mark.parametrize("t", [0.7, 15.0, 60.0])
def test_displacement_trace_single_mode_fock(t):
    w = np.array([0.05])
    beta = 1.0 / 0.05
    got = displacement_trace([0.3], [0.3], t, 0.0, 0.0, 0.0, beta, w)
    ref = fock_displacement_trace([0.3], [0.3], t, 0.0, 0.0, 0.0, beta, w, cutoff=30)
    assert abs(got - ref) < 1e-8


@given(times, times, times, times)
def test_displacement_trace_general_arguments(x, xp, y, yp):
    w = np.array([0.03])
    beta = 2.0 / 0.03
    got = displacement_trace([0.25], [-0.15], x, xp, y, yp, beta, w)
    ref = fock_displacement_trace([0.25], [-0.15], x, xp, y, yp, beta, w, cutoff=30)
    assert abs(got - ref) < 1e-8


@pytest.mark.parametrize("k", CHANNELS)
def test_origin_identity(k, dimer_basis, dimer_bath, dimer_dipoles):
    val = chi_closed(k, 0.0, 0.0, 0.0, dimer_basis, dimer_bath, dimer_dipoles)
    assert abs(val - dipole_product_sum(k, dimer_dipoles)) < 1e-12


@pytest.mark.parametrize("k", CHANNELS)
def test_decoupled_limit(k, dimer_basis, dimer_dipoles, room_beta):
    bath = BathSpec([0.02, 0.05], room_beta, np.zeros((2, 2)))
    rng = np.random.default_rng(k)
    for tau, tp, taup in rng.uniform(0, 200, (10, 3)):
        got = chi_closed(k, tau, tp, taup, dimer_basis, bath, dimer_dipoles)
        assert abs(got - bare_form(k, tau, tp, taup, dimer_basis, dimer_dipoles)) < 1e-12


def test_decoupled_channel1_magnitude_independent_of_population(dimer_basis, dimer_dipoles, room_beta):
    bath = BathSpec([0.02], room_beta, np.zeros((2, 1)))
    vals = chi_closed(1, 30.0, np.linspace(0, 500, 11), 20.0, dimer_basis, bath, dimer_dipoles)
    assert np.ptp(np.abs(vals)) < 1e-13


@pytest.mark.parametrize("k", CHANNELS)
def test_frozen_fock_values(k, dimer_basis, dimer_bath, dimer_dipoles):
    pt, ref = FOCK_REFERENCE[k]
    assert abs(chi_closed(k, *pt, dimer_basis, dimer_bath, dimer_dipoles) - ref) < 1e-9


def test_single_exciton_single_mode_against_oracle():
    basis = diagonalize(SiteSystem([12000.0], [[0.0]], [[1.0, 0.0, 0.0]]))
    d = uniform_projection(basis)
    w = 0.03
    bath = BathSpec([w], 2.0 / w, [[0.3]])
    spec = GridSpec(6.0, 32, 32, tuple(range(32)))
    closed = evaluate_closed_grid(spec, basis, bath, d)
    oracle = FockOracle.diagonal(basis, bath, d, OracleSpec(25)).grid(spec)
    for k in CHANNELS:
        assert np.max(np.abs(closed[k] - oracle[k])) < 1e-7


def test_polaron_shift_lowers_energies(dimer_basis, dimer_bath):
    e = polaron_shifted_energies(dimer_basis, dimer_bath)
    assert np.all(e <= dimer_basis.omega)
    assert np.allclose(dimer_basis.omega - e, dimer_bath.reorganization_energies())


def test_grid_matches_pointwise(dimer_basis, dimer_bath, dimer_dipoles):
    spec = GridSpec(7.0, 4, 4, (0, 3, 5, 9))
    grid = evaluate_closed_grid(spec, dimer_basis, dimer_bath, dimer_dipoles)
    for k in CHANNELS:
        for i, tau in enumerate(spec.tau):
            for p, tp in enumerate(spec.population_times):
                for q, taup in enumerate(spec.tau_prime):
                    ref = chi_closed(k, tau, tp, taup, dimer_basis, dimer_bath, dimer_dipoles)
                    assert abs(grid[k][i, p, q] - ref) < 1e-14


def test_single_point_grid_bit_exact(dimer_basis, dimer_bath, dimer_dipoles):
    spec = GridSpec(5.0, 1, 1, (4,))
    grid = evaluate_closed_grid(spec, dimer_basis, dimer_bath, dimer_dipoles)
    for k in CHANNELS:
        assert grid[k][0, 0, 0] == chi_closed(k, 0.0, 20.0, 0.0, dimer_basis, dimer_bath, dimer_dipoles)


def test_mode_splitting_invariance(dimer_basis, dimer_bath, dimer_dipoles):
    g = dimer_bath.diagonal_couplings
    w = dimer_bath.frequencies
    split = BathSpec(np.repeat(w, 2), dimer_bath.beta, np.repeat(g, 2, axis=1) / np.sqrt(2))
    args = (33.0, 20.0, 0.0, 45.0, dimer_bath.beta)
    for a, b in ((0, 0), (0, 1)):
        one = displacement_trace(g[a], g[b], *args[:4], args[4], w)
        two = displacement_trace(split.diagonal_couplings[a], split.diagonal_couplings[b], *args[:4], args[4],
                                 split.frequencies)
        assert abs(one - two) < 1e-12
    assert abs(chi_closed(2, 10.0, 40.0, 25.0, dimer_basis, split, dimer_dipoles)
               - chi_closed(2, 10.0, 40.0, 25.0, dimer_basis, dimer_bath, dimer_dipoles)) < 1e-12


@given(st.floats(0.1, 3.0))
def test_dipole_rescale_fourth_power(s):
    system = SiteSystem([12000.0, 12150.0], [[0.0, 80.0], [80.0, 0.0]], [[1.0, 0.0, 0.0], [0.3, 1.0, 0.0]])
    scaled = SiteSystem(system.site_energies, system.couplings, s * system.dipoles)
    bath = BathSpec([0.02, 0.05], 30.0, [[0.2, 0.1], [0.1, 0.3]])
    for k in CHANNELS:
        a = chi_closed(k, 12.0, 30.0, 8.0, diagonalize(system), bath, uniform_projection(diagonalize(system)))
        b = chi_closed(k, 12.0, 30.0, 8.0, diagonalize(scaled), bath, uniform_projection(diagonalize(scaled)))
        assert abs(b - s ** 4 * a) <= 1e-12 * max(1.0, abs(b))


def test_errors(dimer_basis, dimer_bath, dimer_dipoles):
    with pytest.raises(ValidationError):
        chi_closed(5, 0.0, 0.0, 0.0, dimer_basis, dimer_bath, dimer_dipoles)
    with pytest.raises(ValidationError):
        chi_closed(1, 0.0, 0.0, 0.0, dimer_basis, BathSpec([0.1], 1.0), dimer_dipoles)
    with pytest.raises(ResourceError):
        evaluate_closed_grid(GridSpec(1.0, 512, 512, (0, 1, 2, 3)), dimer_basis, dimer_bath, dimer_dipoles,
                             memory_cap=1 << 20)


def test_polarization_dependence_enters_through_dipoles(dimer_basis, dimer_bath):
    # a polarization orthogonal to all dipoles silences every channel
    z = [0.0, 0.0, 1.0]
    d = project_dipoles(dimer_basis, z, [1, 0, 0], [1, 0, 0], [1, 0, 0])
    for k in CHANNELS:
        assert chi_closed(k, 10.0, 5.0, 5.0, dimer_basis, dimer_bath, d) == 0
