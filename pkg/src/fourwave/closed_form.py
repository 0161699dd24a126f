"""Exact response functions for harmonic baths coupled diagonally in the exciton basis.

The bath trace of each channel reduces to a product of four polaron displacement
operators, evaluated by :func:`displacement_trace`.
"""

from __future__ import annotations

import numpy as np

from .bath import BathSpec, coth_half
from .errors import ValidationError
from .exciton import DipoleProjection, ExcitonBasis
from .response import CHANNELS, DEFAULT_MEMORY_CAP, GridSpec, ResponseGrid


def polaron_shifted_energies(basis: ExcitonBasis, bath: BathSpec) -> np.ndarray:
    """E~_j = E_j - sum_n g_{j,n}^2 hbar omega_n, in rad/fs."""
    g = _couplings(basis, bath)
    return basis.omega - (g ** 2) @ bath.frequencies


def _couplings(basis: ExcitonBasis, bath: BathSpec) -> np.ndarray:
    g = bath.diagonal_couplings
    if g is None:
        raise ValidationError("closed forms need diagonal exciton-bath couplings", "bath.diagonal_couplings")
    if g.shape[0] != basis.n:
        raise ValidationError(f"expected {basis.n} coupling rows, got {g.shape[0]}", "bath.diagonal_couplings")
    return g


def _kahan_modes(terms) -> np.ndarray:
    total = None
    comp = None
    for term in terms:
        if total is None:
            total = np.array(term, dtype=complex)
            comp = np.zeros_like(total)
            continue
        y = term - comp
        t = total + y
        comp = (t - total) - y
        total = t
    return total


def displacement_trace(g_first, g_second, x, xp, y, yp, beta: float, frequencies) -> np.ndarray:
    """Tr_b{ e^{-S_a(x)} e^{S_a(x')} e^{-S_b(y)} e^{S_b(y')} rho_b }.

    ``g_first`` / ``g_second`` are the coupling rows of the two displacement
    pairs (a and b), times are in fs and broadcast against each other.
    """
    g1 = np.asarray(g_first, dtype=float)
    g2 = np.asarray(g_second, dtype=float)
    w = np.asarray(frequencies, dtype=float)
    if g1.shape != w.shape or g2.shape != w.shape:
        raise ValidationError("coupling rows must match the number of modes")
    x, xp, y, yp = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (x, xp, y, yp)))
    coth = coth_half(beta, w)

    def exponent(n):
        wn, a, b, c = w[n], g1[n], g2[n], coth[n]
        dx, dy = wn * (x - xp), wn * (y - yp)
        e = -a * a * (c * (1.0 - np.cos(dx)) + 1j * np.sin(dx))
        e -= b * b * (c * (1.0 - np.cos(dy)) + 1j * np.sin(dy))
        if a != 0.0 and b != 0.0:
            u1, u2, u3, u4 = wn * (x - y), wn * (xp - y), wn * (x - yp), wn * (xp - yp)
            e -= a * b * c * (np.cos(u1) - np.cos(u2) - np.cos(u3) + np.cos(u4))
            e += 1j * a * b * (np.sin(u1) - np.sin(u2) - np.sin(u3) + np.sin(u4))
        return e

    total = _kahan_modes(exponent(n) for n in range(w.size))
    if total is None:
        return np.ones(x.shape, dtype=complex)
    return np.exp(total)


# Per channel: dipole labels (a*, b, c*, d) of the prefactor d_{a,j}^* d_{b,j} d_{c,j'}^* d_{d,j'},
# the polaron phase exponent, and the displacement-trace arguments.
def _channel_terms(k, tau, tp, taup):
    if k == 1:
        labels = (2, 1, 3, 4)
        phase = lambda ej, ejp: 1j * ejp * tau - 1j * ej * taup
        args = ("jp", "j", tp + taup, tau + tp + taup, taup, 0.0)
    elif k == 2:
        labels = (3, 1, 2, 4)
        phase = lambda ej, ejp: -1j * ej * (tp + taup) + 1j * ejp * (tau + tp)
        args = ("jp", "j", taup, tau + tp + taup, tp + taup, 0.0)
    elif k == 3:
        labels = (3, 2, 1, 4)
        phase = lambda ej, ejp: -1j * ej * tp + 1j * ejp * (tau + tp + taup)
        args = ("jp", "j", 0.0, tau + tp + taup, tp + taup, taup)
    elif k == 4:
        labels = (1, 2, 3, 4)
        phase = lambda ej, ejp: 1j * ej * taup + 1j * ejp * tau
        args = ("j", "jp", 0.0, taup, tp + taup, tau + tp + taup)
    else:
        raise ValidationError(f"channel {k} not in 1..4")
    return labels, phase, args


def chi_closed(k: int, tau, tp, tau_prime, basis: ExcitonBasis, bath: BathSpec, dipoles: DipoleProjection):
    """chi^(k)(tau, T_p, tau') for diagonal coupling; time arguments in fs, broadcastable."""
    g = _couplings(basis, bath)
    tau, tp, taup = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (tau, tp, tau_prime)))
    labels, phase, args = _channel_terms(k, tau, tp, taup)
    e_til = polaron_shifted_energies(basis, bath)
    da, db, dc, dd = (dipoles[a] for a in labels)
    out = np.zeros(tau.shape, dtype=complex)
    first, second, x, xp, y, yp = args
    for j in range(basis.n):
        for jp in range(basis.n):
            pref = np.conj(da[j]) * db[j] * np.conj(dc[jp]) * dd[jp]
            if pref == 0:
                continue
            rows = {"j": g[j], "jp": g[jp]}
            tr = displacement_trace(rows[first], rows[second], x, xp, y, yp, bath.beta, bath.frequencies)
            out += pref * np.exp(phase(e_til[j], e_til[jp])) * tr
    return out


def evaluate_closed_grid(spec: GridSpec, basis: ExcitonBasis, bath: BathSpec, dipoles: DipoleProjection,
                         channels=CHANNELS, memory_cap: int = DEFAULT_MEMORY_CAP) -> ResponseGrid:
    # complex result per channel plus ~8 complex temporaries per point inside chi_closed
    spec.check_memory(len(channels) + 8, cap=memory_cap)
    tau = spec.tau[:, None, None]
    tp = spec.population_times[None, :, None]
    taup = spec.tau_prime[None, None, :]
    values = {}
    for k in channels:
        values[k] = np.ascontiguousarray(
            np.broadcast_to(chi_closed(k, tau, tp, taup, basis, bath, dipoles), spec.shape))
    return ResponseGrid(spec, values, "closed")
