"""Second-order multistep master equations for the four response channels.

Each channel is a chain of reduced operators evolved interval by interval
(tau', then T_p for channels 2 and 3, then tau). All operators are in local
interaction pictures, A~(t) = e^{i h_e t} A e^{-i h_e t} with t measured from
the start of the interval, while bath times run continuously from the first
pulse. Cross-interval bath memory enters through the source terms built by
``_tau_source``, ``_population_source`` and ``_tp_source``.

Every time argument is an integer multiple of the grid step, so correlation
values come straight from a CorrelationTable without interpolation.
"""

from __future__ import annotations

import numpy as np

from .bath import CorrelationTable, diagonal_to_channels
from .errors import StateError, ValidationError
from .exciton import DipoleProjection, ExcitonBasis
from .response import CHANNELS, DEFAULT_MEMORY_CAP, GridSpec, ResponseGrid
from .volterra import trapezoid_weights, volterra_solve


class KernelContext:
    """Coupling channels, tabulated correlations and cached interaction-picture operators."""

    def __init__(self, basis: ExcitonBasis, channels, frequencies, beta: float, dt: float, n_steps: int):
        if len(channels) == 0:
            raise ValidationError("at least one coupling channel is required", "bath.channels")
        self.omega = basis.omega
        self.n = basis.n
        ops = np.array([ch.operator for ch in channels])
        if ops.shape[1:] != (self.n, self.n):
            raise ValidationError(f"channel operators must be {self.n}x{self.n}", "bath.channels")
        self.ops = ops
        self.table = CorrelationTable.build(channels, frequencies, beta, dt, n_steps)
        self.dt = float(dt)
        gap = np.subtract.outer(self.omega, self.omega)
        t = self.dt * np.arange(n_steps + 1)
        # A~_a(m dt)_{ij} = A_{a,ij} e^{i(w_i - w_j) m dt}
        self._atilde = np.einsum("mij,aij->maij", np.exp(1j * t[:, None, None] * gap), ops)
        self._gap = gap

    @classmethod
    def diagonal(cls, basis, bath, dt, n_steps):
        return cls(basis, diagonal_to_channels(bath), bath.frequencies, bath.beta, dt, n_steps)

    @property
    def n_steps(self) -> int:
        return self.table.n_steps

    @property
    def n_channels(self) -> int:
        return self.ops.shape[0]

    def atilde(self, m) -> np.ndarray:
        """A~_a at integer steps ``m``; shape ``np.shape(m) + (n_ch, n, n)``."""
        m = np.asarray(m)
        if np.any(m < 0) or np.any(m > self.n_steps):
            raise StateError(f"interaction-picture cache covers steps 0..{self.n_steps}")
        return self._atilde[m]

    def atilde_at(self, t: float) -> np.ndarray:
        return np.exp(1j * t * self._gap)[None] * self.ops

    def corr(self, t: float) -> np.ndarray:
        """C_ab(t); table lookup on grid points, cubic interpolation otherwise."""
        m = t / self.dt
        if abs(m - round(m)) < 1e-9:
            return self.table.lag(int(round(m)))
        return self.table.at(t)

    def free(self, t) -> np.ndarray:
        """Diagonal of e^{-i h_e t}."""
        return np.exp(-1j * np.multiply.outer(t, self.omega))


# -- pointwise kernels -----------------------------------------------------

def _check_order(t, s):
    if s > t + 1e-12 or s < -1e-12:
        raise ValidationError(f"kernel needs t >= s >= 0, got t={t}, s={s}")


def kernel_left(t: float, s: float, ctx: KernelContext, x: np.ndarray) -> np.ndarray:
    """sum_ab C_ab(t - s) A~_a(t) A~_b(s) X."""
    _check_order(t, s)
    c, at, as_ = ctx.corr(t - s), ctx.atilde_at(t), ctx.atilde_at(s)
    return np.einsum("ab,aij,bjk,kl->il", c, at, as_, x)


def kernel_right(t: float, s: float, ctx: KernelContext, x: np.ndarray) -> np.ndarray:
    """sum_ab C_ab(s - t) X A~_a(s) A~_b(t)."""
    _check_order(t, s)
    c, at, as_ = ctx.corr(s - t), ctx.atilde_at(t), ctx.atilde_at(s)
    return np.einsum("ab,ij,ajk,bkl->il", c, x, as_, at)


def dissipator_kernel(t: float, s: float, ctx: KernelContext, x: np.ndarray) -> np.ndarray:
    """sum_ab C_ab(t-s)[A~_a(t)A~_b(s)X - A~_b(s)XA~_a(t)] + C_ab(t-s)^*[XA~_b(s)A~_a(t) - A~_a(t)XA~_b(s)]."""
    _check_order(t, s)
    c, at, as_ = ctx.corr(t - s), ctx.atilde_at(t), ctx.atilde_at(s)
    inner = np.einsum("ab,bij,jk->aik", c, as_, x) - np.einsum("ab,ij,bjk->aik", c.conj(), x, as_)
    return np.einsum("aij,ajk->ik", at, inner) - np.einsum("aij,ajk->ik", inner, at)


# -- batched memory integrals for volterra_solve ---------------------------
# history has shape (m+1, batch, n, n)

def left_memory(ctx: KernelContext):
    def memory(m, hist, w):
        c = ctx.table.lag(m - np.arange(m + 1))
        inner = np.einsum("k,kab,kbij,kBjl->Bail", w, c, ctx.atilde(np.arange(m + 1)), hist, optimize=True)
        return np.einsum("aij,Bajl->Bil", ctx.atilde(m), inner)
    return memory


def right_memory(ctx: KernelContext):
    def memory(m, hist, w):
        c = ctx.table.lag(np.arange(m + 1) - m)
        inner = np.einsum("k,kab,kBij,kajl->Bbil", w, c, hist, ctx.atilde(np.arange(m + 1)), optimize=True)
        return np.einsum("Bbij,bjl->Bil", inner, ctx.atilde(m))
    return memory


def dissipator_memory(ctx: KernelContext):
    def memory(m, hist, w):
        k = np.arange(m + 1)
        c = ctx.table.lag(m - k) * w[:, None, None]
        ak = ctx.atilde(k)
        inner = (np.einsum("kab,kbij,kBjl->Bail", c, ak, hist, optimize=True)
                 - np.einsum("kab,kBij,kbjl->Bail", c.conj(), hist, ak, optimize=True))
        am = ctx.atilde(m)
        return np.einsum("aij,Bajl->Bil", am, inner) - np.einsum("Bajl,alk->Bjk", inner, am)
    return memory


# -- source terms ----------------------------------------------------------

def _tau_source(ctx: KernelContext, v: np.ndarray, spec: GridSpec, conj: bool) -> np.ndarray:
    """W_a[m, p, q] = sum_b int_0^{tau'_q} ds C_ab(tau_m + T_p + tau'_q - s) V_b[q](s).

    ``v`` has shape (n_tau', n_tau', n_ch, n, n) with v[q, k] = V_b[q](k dt) for k <= q.
    With ``conj`` the correlation is conjugated (C_ba at the reversed lag).
    """
    m = np.arange(spec.n_tau)[:, None, None]
    p = np.array(spec.population_steps)[None, :, None]
    out = np.zeros((spec.n_tau, len(spec.population_steps), spec.n_tau_prime, ctx.n_channels, ctx.n, ctx.n),
                   dtype=complex)
    for q in range(1, spec.n_tau_prime):
        k = np.arange(q + 1)
        c = ctx.table.lag(m + p + q - k[None, None, :])
        if conj:
            c = c.conj()
        out[:, :, q] = np.einsum("mpkab,k,kbij->mpaij", c, trapezoid_weights(q, ctx.dt), v[q, :q + 1],
                                 optimize=True)
    return out


def _population_source(ctx: KernelContext, v: np.ndarray, n_tp: int, n_tau_prime: int, conj: bool) -> np.ndarray:
    """W_a[T, q] = sum_b int_0^{tau'_q} ds C_ab(T + tau'_q - s) V_b[q](s), T = 0..n_tp."""
    t = np.arange(n_tp + 1)[:, None]
    out = np.zeros((n_tp + 1, n_tau_prime, ctx.n_channels, ctx.n, ctx.n), dtype=complex)
    for q in range(1, n_tau_prime):
        k = np.arange(q + 1)
        c = ctx.table.lag(t + q - k[None, :])
        if conj:
            c = c.conj()
        out[:, q] = np.einsum("Tkab,k,kbij->Taij", c, trapezoid_weights(q, ctx.dt), v[q, :q + 1], optimize=True)
    return out


def _tp_source(ctx: KernelContext, g2: np.ndarray, spec: GridSpec) -> np.ndarray:
    """W_a[m, p, q] = sum_b int_0^{T_p} du [C_ab(tau_m + T_p - u) A~_b(u) g2~(u)
    - C_ab(tau_m + T_p - u)^* g2~(u) A~_b(u)], with g2 of shape (n_T + 1, n_tau', n, n)."""
    m = np.arange(spec.n_tau)[:, None]
    out = np.zeros((spec.n_tau, len(spec.population_steps), spec.n_tau_prime, ctx.n_channels, ctx.n, ctx.n),
                   dtype=complex)
    for ip, p in enumerate(spec.population_steps):
        if p == 0:
            continue
        u = np.arange(p + 1)
        c = ctx.table.lag(m + p - u[None, :]) * trapezoid_weights(p, ctx.dt)[None, :, None, None]
        au = ctx.atilde(u)
        out[:, ip] = (np.einsum("mkab,kbij,kqjl->mqail", c, au, g2[:p + 1], optimize=True)
                      - np.einsum("mkab,kqij,kbjl->mqail", c.conj(), g2[:p + 1], au, optimize=True))
    return out


def _sandwich(left_diag, x, right_diag):
    # diag(l) X diag(r), broadcasting over leading axes
    return left_diag[..., :, None] * x * right_diag[..., None, :]


def _ket_bra(a, b):
    return np.outer(a, np.conj(b))


# -- channel workflows -------------------------------------------------------

def _finish(ctx, g3, spec):
    # chi = Tr{ g3~(tau) e^{i h_e tau} }
    phase = np.exp(1j * np.multiply.outer(spec.tau, ctx.omega))  # (n_tau, n)
    diag = np.diagonal(g3, axis1=-2, axis2=-1)  # (n_tau, B, n)
    chi = np.einsum("mBi,mi->mB", diag, phase)
    return chi.reshape(spec.n_tau, len(spec.population_steps), spec.n_tau_prime)


def _solve_tau(ctx, init, source, spec):
    # init (B, n, n) with B = n_T * n_tau'; source (n_tau, B, n, n)
    hist = volterra_solve(right_memory(ctx), init, spec.n_tau - 1, ctx.dt, source=lambda m: source[m])
    return hist.values


def _apply_tau_ops(ctx, w, spec):
    # sum_a W_a[m, p, q] A~_a(tau_m) -> (n_tau, B, n, n)
    at = ctx.atilde(np.arange(spec.n_tau))
    s = np.einsum("mpqaij,majk->mpqik", w, at, optimize=True)
    return s.reshape(spec.n_tau, -1, ctx.n, ctx.n)


def _chi1(ctx, d, spec):
    n_q = spec.n_tau_prime
    y = _ket_bra(d[1], d[3])  # |D1><D3|
    x = _ket_bra(d[4], d[2])  # |D4><D2|
    g1 = volterra_solve(left_memory(ctx), y[None], n_q - 1, ctx.dt).values[:, 0]
    taup = spec.tau_prime
    e_q = ctx.free(taup)  # diag e^{-i h_e tau'}
    v = np.zeros((n_q, n_q, ctx.n_channels, ctx.n, ctx.n), dtype=complex)
    ag = np.einsum("kbij,kjl->kbil", ctx.atilde(np.arange(n_q)), g1)
    v[:] = ag[None]
    w = _tau_source(ctx, v, spec, conj=False)
    # left factor X e^{-i h_e tau'}
    w = np.einsum("ij,qj,mpqajk->mpqaik", x, e_q, w, optimize=True)
    src = _apply_tau_ops(ctx, w, spec)
    init = np.einsum("ij,qj,qjk->qik", x, e_q, g1)
    init = np.broadcast_to(init[None], (len(spec.population_steps),) + init.shape).reshape(-1, ctx.n, ctx.n)
    g3 = _solve_tau(ctx, init, src, spec)
    return _finish(ctx, g3, spec), {"g1": g1}


def _chi4(ctx, d, spec):
    n_q = spec.n_tau_prime
    x = _ket_bra(d[4], d[1])  # |D4><D1|
    y = _ket_bra(d[2], d[3])  # |D2><D3|
    g1 = volterra_solve(right_memory(ctx), x[None], n_q - 1, ctx.dt).values[:, 0]
    e_q = np.conj(ctx.free(spec.tau_prime))  # diag e^{+i h_e tau'}
    # V_b[q](k) = g1~(k) A~_b(k) e^{i h_e tau'_q} Y
    ga = np.einsum("kij,kbjl->kbil", g1, ctx.atilde(np.arange(n_q)))
    v = np.einsum("kbij,qj,jl->qkbil", ga, e_q, y, optimize=True)
    w = -_tau_source(ctx, v, spec, conj=True)
    src = _apply_tau_ops(ctx, w, spec)
    init = np.einsum("qij,qj,jk->qik", g1, e_q, y)
    init = np.broadcast_to(init[None], (len(spec.population_steps),) + init.shape).reshape(-1, ctx.n, ctx.n)
    g3 = _solve_tau(ctx, init, src, spec)
    return _finish(ctx, g3, spec), {"g1": g1}


def _population_chain(ctx, spec, g1_init, v, sign, conj):
    """Solve g2~ over the dense population axis for every tau', batched over tau'."""
    n_q = spec.n_tau_prime
    n_tp = max(spec.population_steps)
    w2 = _population_source(ctx, v, n_tp, n_q, conj)
    at = ctx.atilde(np.arange(n_tp + 1))
    # I2[T, q] = sign * sum_a [A~_a(T), W_a[T, q]]
    src2 = sign * (np.einsum("Taij,Tqajk->Tqik", at, w2) - np.einsum("Tqaij,Tajk->Tqik", w2, at))
    return volterra_solve(dissipator_memory(ctx), g1_init, n_tp, ctx.dt, source=lambda m: src2[m]).values


def _chi23(ctx, d, spec, k):
    n_q = spec.n_tau_prime
    x = _ket_bra(d[4], d[3])  # |D4><D3|
    idx = np.arange(n_q)
    aq = ctx.atilde(idx)
    if k == 2:
        y = _ket_bra(d[1], d[2])
        g1t = volterra_solve(left_memory(ctx), y[None], n_q - 1, ctx.dt).values[:, 0]
        e_q = ctx.free(spec.tau_prime)
        g1 = e_q[:, :, None] * g1t  # e^{-i h_e tau'} g1~
        # V_b[q](s) = e^{-i h_e tau'_q} A~_b(s) g1~(s)
        v = np.einsum("qi,kbij,kjl->qkbil", e_q, aq, g1t, optimize=True)
        sign, conj, s3 = -1.0, False, 1.0
    else:
        y = _ket_bra(d[2], d[1])
        g1t = volterra_solve(right_memory(ctx), y[None], n_q - 1, ctx.dt).values[:, 0]
        e_q = np.conj(ctx.free(spec.tau_prime))
        g1 = g1t * e_q[:, None, :]  # g1~ e^{i h_e tau'}
        # V_b[q](u) = g1~(u) A~_b(u) e^{i h_e tau'_q}
        v = np.einsum("kij,kbjl,ql->qkbil", g1t, aq, e_q, optimize=True)
        sign, conj, s3 = 1.0, True, -1.0
    g2t = _population_chain(ctx, spec, g1, v, sign, conj)  # (n_T+1, n_q, n, n)
    w = s3 * _tau_source(ctx, v, spec, conj) + _tp_source(ctx, g2t, spec)
    p_steps = np.array(spec.population_steps)
    ep = ctx.free(ctx.dt * p_steps)  # (n_T, n) diag e^{-i h_e T_p}
    # X e^{-i h_e T_p} (W_a) e^{i h_e T_p}
    w = np.einsum("ij,pj,mpqajk,pk->mpqaik", x, ep, w, np.conj(ep), optimize=True)
    src = _apply_tau_ops(ctx, w, spec)
    g2 = _sandwich(ep[:, None, :], g2t[p_steps], np.conj(ep)[:, None, :])  # (n_T, n_q, n, n)
    init = np.einsum("ij,pqjk->pqik", x, g2).reshape(-1, ctx.n, ctx.n)
    g3 = _solve_tau(ctx, init, src, spec)
    return _finish(ctx, g3, spec), {"g1": g1t, "g2": g2t}


def chi_qme(k: int, spec: GridSpec, ctx: KernelContext, dipoles: DipoleProjection, keep_histories: bool = False):
    """chi^(k) on a grid from the second-order multistep master equations."""
    if k not in CHANNELS:
        raise ValidationError(f"channel {k} not in 1..4")
    if ctx.n_steps < spec.max_step:
        raise StateError(f"correlation table has {ctx.n_steps} steps, grid needs {spec.max_step}")
    if abs(ctx.dt - spec.dt) > 1e-12 * spec.dt:
        raise ValidationError(f"grid step {spec.dt} differs from correlation step {ctx.dt}", "grids.dt")
    d = {a: np.asarray(dipoles[a]) for a in (1, 2, 3, 4)}
    if k == 1:
        chi, hist = _chi1(ctx, d, spec)
    elif k == 4:
        chi, hist = _chi4(ctx, d, spec)
    else:
        chi, hist = _chi23(ctx, d, spec, k)
    return (chi, hist) if keep_histories else chi


def qme_memory_estimate(spec: GridSpec, n: int, n_channels: int) -> int:
    """Bytes for the largest arrays held at once (source terms and tau histories)."""
    pts = spec.n_tau * len(spec.population_steps) * spec.n_tau_prime
    per_point = (2 * n_channels + 4) * n * n
    v = spec.n_tau_prime ** 2 * n_channels * n * n
    g2 = (max(spec.population_steps) + 1) * spec.n_tau_prime * n * n
    return 16 * (pts * per_point + v + g2)


def evaluate_qme_grid(spec: GridSpec, ctx: KernelContext, dipoles: DipoleProjection, channels=CHANNELS,
                      memory_cap: int = DEFAULT_MEMORY_CAP) -> ResponseGrid:
    spec.check_memory(0, extra=qme_memory_estimate(spec, ctx.n, ctx.n_channels), cap=memory_cap)
    return ResponseGrid(spec, {k: chi_qme(k, spec, ctx, dipoles) for k in channels}, "qme")
