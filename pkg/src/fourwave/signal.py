"""Phase-matched third-order signals, 2D Fourier transforms and static-disorder averaging.

Naming convention: the (chi1 + chi2) group, radiated along -k1 + k2 + k3, is called
*rephasing*; the (chi3 + chi4) group along k1 - k2 + k3 is *nonrephasing*.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import ValidationError
from .exciton import SiteSystem
from .response import ResponseGrid

REPHASING = "rephasing"
NONREPHASING = "nonrephasing"
SIGNAL_KINDS = (REPHASING, NONREPHASING)

_FWHM_TO_SIGMA = 1.0 / np.sqrt(8.0 * np.log(2.0))
SUPPORT_FWHMS = 2.5  # envelope treated as zero beyond this many FWHM from its center


@dataclass(frozen=True)
class PulseSetup:
    carriers: tuple  # omega_1..3, rad/fs
    envelopes: tuple = ("impulsive", "impulsive", "impulsive")  # "impulsive" or a Gaussian FWHM in fs
    centers: tuple = (0.0, 0.0, 0.0)  # t_1 <= t_2 <= t_3, fs

    def __post_init__(self):
        if len(self.carriers) != 3 or len(self.envelopes) != 3 or len(self.centers) != 3:
            raise ValidationError("need three carriers, envelopes and centers", "pulses")
        if not np.all(np.isfinite(self.carriers)):
            raise ValidationError("carriers must be finite", "pulses.carriers")
        c = self.centers
        if not (c[0] <= c[1] <= c[2]):
            raise ValidationError("pulse centers must be ordered t1 <= t2 <= t3", "pulses.centers")
        for i, e in enumerate(self.envelopes):
            if e == "impulsive":
                continue
            if not isinstance(e, (int, float)) or not np.isfinite(e) or e <= 0:
                raise ValidationError(f"envelope must be 'impulsive' or a positive FWHM, got {e!r}",
                                      f"pulses.envelopes[{i}]")

    @property
    def impulsive(self) -> bool:
        return all(e == "impulsive" for e in self.envelopes)


def gaussian_envelope(t, fwhm: float) -> np.ndarray:
    """Unit-area Gaussian with the given intensity-independent FWHM."""
    s = fwhm * _FWHM_TO_SIGMA
    return np.exp(-0.5 * (np.asarray(t) / s) ** 2) / (s * np.sqrt(2 * np.pi))


def _check_grids(grid: ResponseGrid):
    missing = [k for k in (1, 2, 3, 4) if k not in grid.values]
    if missing:
        raise ValidationError(f"response grid lacks channels {missing}")


def _phase_factors(grid: ResponseGrid, gap_omega: float, carriers):
    spec = grid.spec
    w1, w2, _ = carriers
    tau = spec.tau[:, None, None]
    tp = spec.population_times[None, :, None]
    taup = spec.tau_prime[None, None, :]
    reph = np.exp(-1j * (w2 - w1) * tp) * np.exp(1j * w1 * taup) * np.exp(1j * gap_omega * (tau - taup))
    nonreph = np.exp(1j * (w2 - w1) * tp) * np.exp(-1j * w1 * taup) * np.exp(1j * gap_omega * (tau + taup))
    return reph, nonreph


def impulsive_signal(grid: ResponseGrid, gap_omega: float, carriers):
    """(rephasing, nonrephasing) time-domain signals for delta-function pulses.

    The detection carrier e^{i(w3 +- w2 -+ w1)(t_m - tau)} is left out; it is
    absorbed by the rotating frame applied in :func:`fourier_2d`.
    """
    _check_grids(grid)
    reph, nonreph = _phase_factors(grid, gap_omega, carriers)
    return reph * (grid[1] + grid[2]), nonreph * (grid[3] + grid[4])


def _axis_support(name, center, half, axis_max):
    if center - half < -1e-9 or center + half > axis_max + 1e-9:
        raise ValidationError(
            f"envelope support [{center - half:.3g}, {center + half:.3g}] fs exceeds the grid range [0, {axis_max:.3g}] fs",
            name)


def assemble_polarization(grid: ResponseGrid, gap_omega: float, pulses: PulseSetup, t_m: float):
    """eps_m . P^(3)(t_m) by trapezoid quadrature over (tau, T_p, tau').

    Returns ``(signal, rephasing_bracket, nonrephasing_bracket)`` where the
    brackets are the complex integrals along each phase-matching direction and
    ``signal = 2 Im(rephasing + nonrephasing)``.
    """
    _check_grids(grid)
    spec = grid.spec
    t1, t2, t3 = pulses.centers
    w1, w2, w3 = pulses.carriers
    centers = {"tau": t_m - t3, "T_p": t3 - t2, "tau_prime": t2 - t1}
    reph_ph, nonreph_ph = _phase_factors(grid, gap_omega, pulses.carriers)
    s_r = np.exp(1j * (w3 + w2 - w1) * (t_m - spec.tau))[:, None, None]
    s_n = np.exp(1j * (w3 - w2 + w1) * (t_m - spec.tau))[:, None, None]
    r = reph_ph * (grid[1] + grid[2]) * s_r
    n = nonreph_ph * (grid[3] + grid[4]) * s_n

    if pulses.impulsive:
        idx = []
        for name, axis in (("tau", spec.tau), ("T_p", spec.population_times), ("tau_prime", spec.tau_prime)):
            hit = np.flatnonzero(np.abs(axis - centers[name]) < 1e-9 * max(1.0, spec.dt))
            if hit.size == 0:
                raise ValidationError(f"pulse delay {centers[name]} fs is not on the grid", name)
            idx.append(hit[0])
        rb, nb = complex(r[tuple(idx)]), complex(n[tuple(idx)])
        return 2.0 * (rb + nb).imag, rb, nb

    if any(e == "impulsive" for e in pulses.envelopes):
        raise ValidationError("mixing impulsive and finite envelopes is not supported", "pulses.envelopes")
    steps = np.array(spec.population_steps)
    if steps[0] != 0 or np.any(np.diff(steps) != 1):
        raise ValidationError("finite envelopes need a contiguous population axis starting at 0", "T_p")
    h1, h2, h3 = (SUPPORT_FWHMS * f for f in pulses.envelopes)
    if t1 - h1 < -1e-9:
        # the time integrals start at t = 0, so the first pulse must lie entirely after it
        raise ValidationError(f"first pulse support starts at {t1 - h1:.3g} fs, before t = 0", "pulses.centers")
    _axis_support("tau", centers["tau"], h3, spec.tau[-1])
    _axis_support("T_p", centers["T_p"], h2 + h3, spec.population_times[-1])
    _axis_support("tau_prime", centers["tau_prime"], h1 + h2, spec.tau_prime[-1])

    f1, f2, f3 = pulses.envelopes
    tau = spec.tau[:, None, None]
    tp = spec.population_times[None, :, None]
    taup = spec.tau_prime[None, None, :]
    env = (gaussian_envelope(t_m - tau - t3, f3) * gaussian_envelope(t_m - tau - tp - t2, f2)
           * gaussian_envelope(t_m - tau - tp - taup - t1, f1))
    env = env * ((tau + tp + taup) <= t_m + 1e-12)  # causal region of the triple integral
    rb = _trapezoid3(env * r, spec.dt)
    nb = _trapezoid3(env * n, spec.dt)
    return 2.0 * (rb + nb).imag, rb, nb


def _trapezoid3(f, dt):
    for ax in (2, 1, 0):
        f = np.trapezoid(f, dx=dt, axis=ax) if f.shape[ax] > 1 else np.take(f, 0, axis=ax)
    return complex(f)


# -- 2D spectra --------------------------------------------------------------

@dataclass(frozen=True)
class Spectrum2D:
    """Spectra on absolute frequency axes (rad/fs); data arrays are (n_T, n_w_tau_prime, n_w_tau)."""

    w_tau_prime: np.ndarray
    w_tau: np.ndarray
    population_times: np.ndarray
    rephasing: np.ndarray
    nonrephasing: np.ndarray

    def __getitem__(self, kind: str) -> np.ndarray:
        if kind not in SIGNAL_KINDS:
            raise ValidationError(f"unknown signal kind {kind!r}")
        return self.rephasing if kind == REPHASING else self.nonrephasing

    def total(self) -> np.ndarray:
        return self.rephasing + self.nonrephasing


def edge_window(n: int, fraction: float = 0.1) -> np.ndarray:
    """Ones with a raised-cosine taper over the last ``fraction`` of the samples."""
    w = np.ones(n)
    m = int(round(fraction * n))
    if m > 0:
        w[n - m:] = 0.5 * (1 + np.cos(np.pi * (np.arange(1, m + 1)) / m))
    return w


def fourier_2d(signal: np.ndarray, p: int, kind: str, dt: float, frame: float = 0.0,
               excitation_offset: float = 0.0, window: bool = True, pad: int = 2):
    """2D spectrum of ``signal[:, p, :]`` (axes tau, tau').

    Detection axis: kernel e^{-i w tau} applied after multiplying by e^{-i frame tau};
    reported frequencies are shifted back by ``frame``. Excitation axis: kernel
    e^{+i w tau'} for rephasing and e^{-i w tau'} for nonrephasing, shifted by
    ``excitation_offset`` (the first-pulse carrier when signals carry detuning phases).
    With ``window`` the t = 0 samples are halved and a 10% raised-cosine taper is
    applied to the end of each axis. Plain DFT sums, no dt factors, so Parseval reads
    sum|x|^2 = sum|S|^2 / (N_tau N_tau').

    Returns ``(w_tau_prime, w_tau, S)`` with S shaped (N_tau', N_tau), both axes ascending.
    """
    if kind not in SIGNAL_KINDS:
        raise ValidationError(f"unknown signal kind {kind!r}")
    x = np.asarray(signal)[:, p, :].astype(complex)
    n_tau, n_taup = x.shape
    x = x * np.exp(-1j * frame * dt * np.arange(n_tau))[:, None]
    if window:
        x = x * edge_window(n_tau)[:, None] * edge_window(n_taup)[None, :]
        x[0, :] *= 0.5
        x[:, 0] *= 0.5
    n1, n2 = pad * n_tau, pad * n_taup
    s = np.fft.fft(x, n=n1, axis=0)
    if kind == REPHASING:
        s = np.fft.ifft(s, n=n2, axis=1) * n2
    else:
        s = np.fft.fft(s, n=n2, axis=1)
    s = np.fft.fftshift(s, axes=(0, 1))
    w_tau = np.fft.fftshift(np.fft.fftfreq(n1, dt)) * 2 * np.pi + frame
    w_taup = np.fft.fftshift(np.fft.fftfreq(n2, dt)) * 2 * np.pi + excitation_offset
    return w_taup, w_tau, s.T


def spectra_from_signals(rephasing: np.ndarray, nonrephasing: np.ndarray, population_times, dt: float,
                         frame: float, carrier1: float, window: bool = True, pad: int = 2) -> Spectrum2D:
    out = {}
    axes = None
    for kind, sig in ((REPHASING, rephasing), (NONREPHASING, nonrephasing)):
        slabs = []
        for p in range(sig.shape[1]):
            wtp, wt, s = fourier_2d(sig, p, kind, dt, frame, carrier1, window, pad)
            slabs.append(s)
            axes = (wtp, wt)
        out[kind] = np.array(slabs)
    return Spectrum2D(axes[0], axes[1], np.asarray(population_times, dtype=float), out[REPHASING], out[NONREPHASING])


# -- static disorder ---------------------------------------------------------

@dataclass(frozen=True)
class DisorderModel:
    sigma: np.ndarray  # per-site Gaussian standard deviation, cm^-1
    samples: int = 1
    seed: int = 0

    def __post_init__(self):
        s = np.atleast_1d(np.asarray(self.sigma, dtype=float))
        if np.any(s < 0) or not np.all(np.isfinite(s)):
            raise ValidationError("sigma must be finite and >= 0", "disorder.sigma")
        if int(self.samples) < 1:
            raise ValidationError("sample count must be >= 1", "disorder.samples")
        if not 0 <= int(self.seed) < 2 ** 64:
            raise ValidationError("seed must be a 64-bit unsigned integer", "disorder.seed")
        object.__setattr__(self, "sigma", s)
        object.__setattr__(self, "samples", int(self.samples))
        object.__setattr__(self, "seed", int(self.seed))

    def offsets(self, n_sites: int) -> np.ndarray:
        """(samples, n_sites) site-energy offsets; sample i draws from its own spawned stream."""
        sigma = np.broadcast_to(self.sigma, (n_sites,)) if self.sigma.size in (1, n_sites) else None
        if sigma is None:
            raise ValidationError(f"sigma needs 1 or {n_sites} entries", "disorder.sigma")
        children = np.random.SeedSequence(self.seed).spawn(self.samples)
        return np.array([np.random.default_rng(c).normal(0.0, 1.0, n_sites) * sigma for c in children])


@dataclass
class DisorderResult:
    mean: Spectrum2D
    variance: dict = field(default_factory=dict)  # kind -> per-point sample variance of the complex spectra


def disorder_average(run: Callable[[SiteSystem], Spectrum2D], system: SiteSystem, model: DisorderModel,
                     threads: int = 1) -> DisorderResult:
    """Mean spectrum over site-energy disorder, plus per-point sample variance.

    ``run`` maps a SiteSystem to a Spectrum2D on fixed axes. Samples may run on
    several threads; the reduction always proceeds in sample order.
    """
    offsets = model.offsets(system.n_sites)
    systems = [system.with_site_energies(system.site_energies + o) for o in offsets]
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(run, systems))
    else:
        results = [run(s) for s in systems]
    first = results[0]
    mean, var = {}, {}
    for kind in SIGNAL_KINDS:
        acc = np.zeros_like(first[kind])
        for r in results:
            acc = acc + r[kind]
        mean[kind] = acc / len(results)
        sq = np.zeros(first[kind].shape)
        for r in results:
            sq = sq + np.abs(r[kind] - mean[kind]) ** 2
        var[kind] = sq / (len(results) - 1) if len(results) > 1 else sq
    avg = Spectrum2D(first.w_tau_prime, first.w_tau, first.population_times, mean[REPHASING], mean[NONREPHASING])
    return DisorderResult(avg, var)
