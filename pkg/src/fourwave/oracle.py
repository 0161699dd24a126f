"""Brute-force reference: exciton (x) truncated-oscillator Hilbert space, dense diagonalization.

The response functions are evaluated literally from their trace definitions

    chi1 = Tr_b{ e^{-iH_b(tau+T)} <D2|e^{-ih_ex tau'}|D1> rho_b e^{iH_b(T+tau')} <D3|e^{ih_ex tau}|D4> }
    chi2 = Tr_b{ e^{-iH_b tau} <D3|e^{-ih_ex(T+tau')}|D1> rho_b e^{iH_b tau'} <D2|e^{ih_ex(tau+T)}|D4> }
    chi3 = Tr_b{ e^{-iH_b tau} <D3|e^{-ih_ex T}|D2> e^{-iH_b tau'} rho_b <D1|e^{ih_ex(tau+T+tau')}|D4> }
    chi4 = Tr_b{ e^{-iH_b(tau+T+tau')} rho_b <D1|e^{ih_ex tau'}|D2> e^{iH_b T} <D3|e^{ih_ex tau}|D4> }

with no use of the polaron algebra.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import expm

from .bath import BathSpec, CouplingChannel, coupling_matrix, diagonal_to_channels
from .errors import ResourceError, ValidationError
from .exciton import DipoleProjection, ExcitonBasis
from .response import CHANNELS, GridSpec, ResponseGrid


@dataclass(frozen=True)
class OracleSpec:
    cutoff: int | tuple = 20  # Fock levels per mode, scalar or one per mode
    dim_cap: int = 4096

    def cutoffs(self, n_modes: int) -> tuple[int, ...]:
        if np.ndim(self.cutoff) == 0:
            out = (int(self.cutoff),) * n_modes
        else:
            out = tuple(int(c) for c in self.cutoff)
        if len(out) != n_modes or min(out) < 2:
            raise ValidationError(f"need {n_modes} cutoffs >= 2, got {self.cutoff!r}", "oracle.cutoff")
        return out

    def raised(self, by: int = 5) -> "OracleSpec":
        c = self.cutoff + by if np.ndim(self.cutoff) == 0 else tuple(x + by for x in self.cutoff)
        return OracleSpec(c, self.dim_cap)


def ladder(n: int) -> np.ndarray:
    return np.diag(np.sqrt(np.arange(1, n, dtype=float)), 1)


def mode_operators(cutoffs) -> list[np.ndarray]:
    """Lowering operators b_n embedded in the product Fock space."""
    ops = []
    for i, n in enumerate(cutoffs):
        left = int(np.prod(cutoffs[:i], dtype=int))
        right = int(np.prod(cutoffs[i + 1:], dtype=int))
        ops.append(np.kron(np.kron(np.eye(left), ladder(n)), np.eye(right)))
    return ops


def number_energies(frequencies, cutoffs) -> np.ndarray:
    """Diagonal of H_b = sum_n w_n (b^dag b + 1/2) in the product number basis."""
    e = np.zeros(1)
    for w, n in zip(frequencies, cutoffs):
        e = np.add.outer(e, w * (np.arange(n) + 0.5)).reshape(-1)
    return e


def thermal_weights(energies, beta: float) -> np.ndarray:
    p = np.exp(-beta * (energies - energies.min()))
    return p / p.sum()


class FockOracle:
    """Exact response functions for a small exciton system in a truncated Fock space."""

    def __init__(self, basis: ExcitonBasis, channels, frequencies, beta: float, dipoles: DipoleProjection,
                 spec: OracleSpec = OracleSpec()):
        w = np.asarray(frequencies, dtype=float)
        self.cutoffs = spec.cutoffs(w.size)
        self.n_exc = basis.n
        self.n_bath = int(np.prod(self.cutoffs, dtype=int))
        dim = self.n_exc * self.n_bath
        if dim > spec.dim_cap:
            raise ResourceError(f"oracle dimension {dim} exceeds cap {spec.dim_cap}")
        self.spec = spec
        self.beta = float(beta)
        self.dipoles = dipoles
        self.h_e = basis.h_e()
        self.bath_energies = number_energies(w, self.cutoffs)
        self.rho = thermal_weights(self.bath_energies, self.beta)

        b = mode_operators(self.cutoffs)
        h = np.kron(self.h_e, np.eye(self.n_bath)) + np.kron(np.eye(self.n_exc), np.diag(self.bath_energies))
        for m_n, b_n in zip(coupling_matrix(channels, w), b):
            h = h + np.kron(m_n, b_n + b_n.T)
        if np.allclose(h.imag, 0.0):
            h = h.real
        self.h_ex = h
        self.evals, vecs = np.linalg.eigh(h)
        self._vecs = vecs.reshape(self.n_exc, self.n_bath, dim)
        self._left = {}
        self._ops = {}

    @classmethod
    def diagonal(cls, basis: ExcitonBasis, bath: BathSpec, dipoles: DipoleProjection, spec: OracleSpec = OracleSpec()):
        return cls(basis, diagonal_to_channels(bath), bath.frequencies, bath.beta, dipoles, spec)

    def _projected(self, alpha: int) -> np.ndarray:
        # L_alpha[m, k] = sum_j d*_{alpha,j} <j, m|psi_k>
        if alpha not in self._left:
            d = np.conj(self.dipoles[alpha])
            if np.isrealobj(self._vecs) and np.allclose(d.imag, 0.0, rtol=0.0, atol=0.0):
                d = d.real
            self._left[alpha] = np.einsum("j,jmk->mk", d, self._vecs)
        return self._left[alpha]

    def exciton_element(self, alpha: int, beta: int, sign: int, t: float) -> np.ndarray:
        """Bath operator <D_alpha| e^{sign i h_ex t} |D_beta>."""
        key = (alpha, beta, sign, float(t))
        op = self._ops.get(key)
        if op is None:
            la, lb = self._projected(alpha), self._projected(beta)
            if np.isrealobj(la) and np.isrealobj(lb):
                # two real products are cheaper than one complex one
                ph = sign * self.evals * t
                op = (la * np.cos(ph)) @ lb.T + 1j * ((la * np.sin(ph)) @ lb.T)
            else:
                op = (la * np.exp(sign * 1j * self.evals * t)) @ lb.conj().T
            self._ops[key] = op
        return op

    def clear_cache(self):
        self._ops.clear()

    @staticmethod
    def _pair_trace(a, op_a, c, op_b) -> complex:
        # Tr{ diag(a) A diag(c) B } with diagonal bath factors
        return complex(np.sum((a[:, None] * op_a * c[None, :]) * op_b.T))

    def chi(self, k: int, tau: float, tp: float, taup: float) -> complex:
        e, rho = self.bath_energies, self.rho
        if k == 1:
            op_a = self.exciton_element(2, 1, -1, taup)
            op_b = self.exciton_element(3, 4, +1, tau)
            a, c = np.exp(-1j * e * (tau + tp)), rho * np.exp(1j * e * (tp + taup))
        elif k == 2:
            op_a = self.exciton_element(3, 1, -1, tp + taup)
            op_b = self.exciton_element(2, 4, +1, tau + tp)
            a, c = np.exp(-1j * e * tau), rho * np.exp(1j * e * taup)
        elif k == 3:
            op_a = self.exciton_element(3, 2, -1, tp)
            op_b = self.exciton_element(1, 4, +1, tau + tp + taup)
            a, c = np.exp(-1j * e * tau), rho * np.exp(-1j * e * taup)
        elif k == 4:
            op_a = self.exciton_element(1, 2, +1, taup)
            op_b = self.exciton_element(3, 4, +1, tau)
            a, c = rho * np.exp(-1j * e * (tau + tp + taup)), np.exp(1j * e * tp)
        else:
            raise ValidationError(f"channel {k} not in 1..4")
        return self._pair_trace(a, op_a, c, op_b)

    def grid(self, spec: GridSpec, channels=CHANNELS) -> ResponseGrid:
        values = {}
        for k in channels:
            out = np.empty(spec.shape, dtype=complex)
            for i, tau in enumerate(spec.tau):
                for p, tp in enumerate(spec.population_times):
                    for q, taup in enumerate(spec.tau_prime):
                        out[i, p, q] = self.chi(k, tau, tp, taup)
            values[k] = out
        return ResponseGrid(spec, values, "oracle")

    # -- reduced dynamics, for checking master-equation kernels ------------

    def propagator(self, t: float) -> np.ndarray:
        v = self._vecs.reshape(-1, self._vecs.shape[-1])
        return (v * np.exp(-1j * self.evals * t)) @ v.conj().T

    def _partial_trace(self, full: np.ndarray) -> np.ndarray:
        n, m = self.n_exc, self.n_bath
        return np.einsum("ambm->ab", full.reshape(n, m, n, m))

    def reduced_left(self, x: np.ndarray, t: float) -> np.ndarray:
        """Interaction-picture e^{ih_e t} Tr_b{ e^{-ih_ex t} (x rho_b) e^{iH_b t} }."""
        full = self.propagator(t) @ np.kron(x, np.diag(self.rho * np.exp(1j * self.bath_energies * t)))
        return _exp_h(self.h_e, t) @ self._partial_trace(full)

    def reduced_right(self, x: np.ndarray, t: float) -> np.ndarray:
        """Interaction-picture Tr_b{ e^{-iH_b t} rho_b x e^{ih_ex t} } e^{-ih_e t}."""
        full = np.kron(x, np.diag(self.rho * np.exp(-1j * self.bath_energies * t))) @ self.propagator(-t)
        return self._partial_trace(full) @ _exp_h(self.h_e, -t)


def _exp_h(h_e: np.ndarray, t: float) -> np.ndarray:
    # e^{i h_e t} for diagonal h_e
    return np.diag(np.exp(1j * np.diag(h_e) * t))


def fock_oracle(basis: ExcitonBasis, bath, dipoles: DipoleProjection, k: int, tau: float, tp: float, taup: float,
                spec: OracleSpec = OracleSpec(), channels=None) -> complex:
    """Single-point reference value. ``channels`` overrides the diagonal coupling of ``bath``."""
    if channels is None:
        oracle = FockOracle.diagonal(basis, bath, dipoles, spec)
    else:
        oracle = FockOracle(basis, channels, bath.frequencies, bath.beta, dipoles, spec)
    return oracle.chi(k, tau, tp, taup)


# -- single-oscillator checks -------------------------------------------------

def fock_correlation(weight_a: float, weight_b: float, omega: float, beta: float, t, cutoff: int = 40) -> np.ndarray:
    """<B_a(t) B_b(0)> for one mode, B = omega c (b + b^dag), by explicit truncated traces."""
    x = ladder(cutoff)
    x = x + x.T
    e = omega * (np.arange(cutoff) + 0.5)
    rho = thermal_weights(e, beta)
    out = []
    for s in np.atleast_1d(t):
        u = np.exp(1j * e * s)
        bt = (u[:, None] * x * u.conj()[None, :]) * omega * weight_a
        out.append(np.sum(rho * np.diag(bt @ (omega * weight_b * x))))
    return np.array(out).reshape(np.shape(t))


def fock_displacement_trace(g_first, g_second, x, xp, y, yp, beta: float, frequencies, cutoff: int = 30) -> complex:
    """Tr_b{ e^{-S_a(x)} e^{S_a(x')} e^{-S_b(y)} e^{S_b(y')} rho_b } with S(t) = e^{iH_b t} S e^{-iH_b t},
    S = -sum_n g_n (b_n - b_n^dag), by matrix exponentials in a truncated Fock space.

    Uses a doubled cutoff internally and projects back to suppress truncation error of the exponentials.
    """
    w = np.asarray(frequencies, dtype=float)
    big = (2 * cutoff,) * w.size
    b = mode_operators(big)
    e = number_energies(w, big)
    keep = np.all(np.stack(np.unravel_index(np.arange(e.size), big)) < cutoff, axis=0)
    rho = np.where(keep, thermal_weights(np.where(keep, e, np.inf), beta), 0.0)

    def generator(g, t):
        s = -sum(gn * (bn - bn.T) for gn, bn in zip(g, b))
        u = np.exp(1j * e * t)
        return u[:, None] * s * u.conj()[None, :]

    prod = (expm(-generator(g_first, x)) @ expm(generator(g_first, xp))
            @ expm(-generator(g_second, y)) @ expm(generator(g_second, yp)))
    return complex(np.sum(np.diag(prod) * rho))
