"""Job orchestration: config -> exciton basis, bath, response grids, spectra, files, manifest."""

from __future__ import annotations

import logging
import platform
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from .bath import BathSpec, CouplingChannel, diagonal_to_channels, discretize_spectral_density
from .closed_form import evaluate_closed_grid
from .config import JobConfig
from .errors import ConfigError
from .exciton import ExcitonBasis, SiteSystem, diagonalize, project_dipoles
from .io import sha256_file, write_binary, write_json, write_response_csv, write_spectrum_csv
from .oracle import FockOracle, OracleSpec
from .qme import KernelContext, evaluate_qme_grid
from .response import CHANNELS, GridSpec, ResponseGrid
from .signal import (SIGNAL_KINDS, DisorderModel, PulseSetup, Spectrum2D, disorder_average, impulsive_signal,
                     spectra_from_signals)
from .units import CM_TO_RAD_PER_FS, angular_to_wavenumber, beta_from_temperature, wavenumber_to_angular

log = logging.getLogger("fourwave")

MANIFEST_NAME = "manifest.json"
TIMING_NAME = "timing.json"


# -- building model objects from a config ------------------------------------

def build_system(config: JobConfig) -> SiteSystem:
    s = config.system
    return SiteSystem(s.site_energies, s.couplings, s.dipoles, s.reference_energy, s.ground_energy)


def beta_fs(config: JobConfig) -> float:
    b = config.bath
    if b.temperature is not None:
        return beta_from_temperature(b.temperature)
    return b.beta / CM_TO_RAD_PER_FS


def build_bath(config: JobConfig, n_excitons: int) -> BathSpec:
    """Modes and (if given) diagonal couplings, expanded to one row per exciton."""
    b = config.bath
    beta = beta_fs(config)
    if b.spectral_density is not None:
        sd = dict(b.spectral_density)
        base = discretize_spectral_density(sd.pop("model"), sd.pop("n_modes"), beta, **sd)
        return base.for_excitons(n_excitons, b.correlation)
    w = wavenumber_to_angular(b.modes)
    if b.diagonal_couplings is None:
        return BathSpec(w, beta)
    g = np.array(b.diagonal_couplings)
    bath = BathSpec(w, beta, g)
    if g.shape[0] == 1 and n_excitons > 1 or b.correlation == "independent":
        bath = bath.for_excitons(n_excitons, b.correlation)
    return bath


def build_channels(config: JobConfig, basis: ExcitonBasis, bath: BathSpec) -> list[CouplingChannel]:
    """Coupling channels for the master equations: diagonal ones plus any explicit ones."""
    out = diagonal_to_channels(bath) if bath.diagonal_couplings is not None else []
    if config.bath.channels and config.bath.correlation == "independent":
        raise ConfigError("explicit channels cannot be combined with an independent mode expansion",
                          "bath.correlation")
    u = basis.transform
    for ch in config.bath.channels:
        op = np.array(ch.operator)
        if ch.basis == "site":
            op = u.T @ op @ u
        out.append(CouplingChannel(op, ch.weights))
    return out


def grid_spec(config: JobConfig) -> GridSpec:
    g = config.grids
    return GridSpec.from_times(g.dt, g.n_tau, g.n_tau_prime, g.population_times)


def pulse_setup(config: JobConfig, gap_cm: float) -> PulseSetup:
    p = config.pulses
    carriers = p.carriers if p.carriers is not None else [gap_cm] * 3
    return PulseSetup(tuple(wavenumber_to_angular(carriers).tolist()), tuple(p.envelopes), tuple(p.centers))


def _methods(config: JobConfig) -> tuple[str, ...]:
    return ("closed", "qme") if config.method == "both" else (config.method,)


# -- pipeline ----------------------------------------------------------------

class Pipeline:
    """One system -> response grids -> spectra, for a fixed config."""

    def __init__(self, config: JobConfig):
        self.config = config
        self.spec = grid_spec(config)
        self.system = build_system(config)
        self.gap_cm = self.system.reference_energy - self.system.ground_energy
        self.gap = float(wavenumber_to_angular(self.gap_cm))
        self.pulses = pulse_setup(config, self.gap_cm)
        self.polarizations = np.array(config.pulses.polarizations)

    def responses(self, system: SiteSystem, method: str, channels=CHANNELS) -> ResponseGrid:
        basis = diagonalize(system)
        dip = project_dipoles(basis, *self.polarizations)
        bath = build_bath(self.config, basis.n)
        cap = self.config.memory_cap_bytes
        if method == "closed":
            return evaluate_closed_grid(self.spec, basis, bath, dip, channels, cap)
        ctx = KernelContext(basis, build_channels(self.config, basis, bath), bath.frequencies, bath.beta,
                            self.spec.dt, self.spec.max_step)
        return evaluate_qme_grid(self.spec, ctx, dip, channels, cap)

    def spectra(self, grid: ResponseGrid) -> Spectrum2D:
        reph, nonreph = impulsive_signal(grid, self.gap, self.pulses.carriers)
        return spectra_from_signals(reph, nonreph, self.spec.population_times, self.spec.dt,
                                    frame=self.gap, carrier1=self.pulses.carriers[0])

    def spectra_for(self, system: SiteSystem, method: str) -> Spectrum2D:
        return self.spectra(self.responses(system, method))

    @property
    def disordered(self) -> bool:
        d = self.config.disorder
        return d.samples > 1 or np.any(np.asarray(d.sigma) > 0)


def planned_artifacts(config: JobConfig) -> list[dict]:
    spec = grid_spec(config)
    out = [{"path": "metadata.json", "kind": "metadata"}]
    fmts = config.output.formats
    for m in _methods(config):
        for k in CHANNELS:
            for f in fmts:
                ext = "csv" if f == "csv" else "bin"
                out.append({"path": f"response_{m}_chi{k}.{ext}", "kind": "response", "method": m, "channel": k})
        for kind in SIGNAL_KINDS:
            for p in range(len(spec.population_steps)):
                for f in fmts:
                    ext = "csv" if f == "csv" else "bin"
                    out.append({"path": f"spectrum_{m}_{kind}_T{p}.{ext}", "kind": "spectrum", "method": m,
                                "signal": kind, "population_index": p})
    return sorted(out, key=lambda a: a["path"])


def _deviation(closed: ResponseGrid, qme: ResponseGrid) -> dict:
    out = {}
    for k in CHANNELS:
        diff = np.max(np.abs(qme[k] - closed[k]))
        scale = np.max(np.abs(closed[k]))
        out[f"chi{k}"] = {"max_abs": float(diff), "max_rel": float(diff / scale) if scale > 0 else None}
    return out


def run_job(config: JobConfig, threads: int = 1, dry_run: bool = False) -> dict:
    """Run the configured pipeline and write results; returns the manifest."""
    threads = max(1, int(threads))
    spec = grid_spec(config)
    planned = planned_artifacts(config)
    manifest = {
        "format": "fourwave-manifest",
        "version": 1,
        "method": config.method,
        "grid": {"dt": spec.dt, "n_tau": spec.n_tau, "n_tau_prime": spec.n_tau_prime,
                 "population_steps": list(spec.population_steps),
                 "population_times": spec.population_times.tolist()},
        "seed": config.disorder.seed,
    }
    if config.bath.channels and config.method != "qme":
        raise ConfigError("closed forms cover diagonal couplings only; use method 'qme' with explicit channels",
                          "method")
    if dry_run:
        manifest["dry_run"] = True
        manifest["artifacts"] = planned
        return manifest

    timings = {}
    pipe = Pipeline(config)
    out_dir = Path(config.output.directory)
    out_dir.mkdir(parents=True, exist_ok=True)
    methods = _methods(config)

    t0 = time.perf_counter()
    tasks = [(m, k) for m in methods for k in CHANNELS]

    def one(task):
        m, k = task
        return pipe.responses(pipe.system, m, (k,))[k]

    with ThreadPoolExecutor(max_workers=threads) as pool:
        values = list(pool.map(one, tasks))
    grids = {m: ResponseGrid(spec, {k: values[tasks.index((m, k))] for k in CHANNELS}, m) for m in methods}
    timings["responses"] = time.perf_counter() - t0
    log.info("response grids done in %.2f s", timings["responses"])

    t0 = time.perf_counter()
    spectra = {}
    for m in methods:
        if pipe.disordered:
            d = config.disorder
            model = DisorderModel(np.asarray(d.sigma, dtype=float), d.samples, d.seed)
            spectra[m] = disorder_average(lambda s, m=m: pipe.spectra_for(s, m), pipe.system, model, threads).mean
        else:
            spectra[m] = pipe.spectra(grids[m])
    timings["spectra"] = time.perf_counter() - t0
    log.info("spectra done in %.2f s", timings["spectra"])

    t0 = time.perf_counter()
    for art in planned:
        path = out_dir / art["path"]
        if art["kind"] == "response":
            data = grids[art["method"]][art["channel"]]
            if path.suffix == ".csv":
                write_response_csv(path, spec, data)
            else:
                write_binary(path, data, spec.dt)
        elif art["kind"] == "spectrum":
            sp = spectra[art["method"]]
            data = sp[art["signal"]][art["population_index"]]
            w_tp, w_t = angular_to_wavenumber(sp.w_tau_prime), angular_to_wavenumber(sp.w_tau)
            if path.suffix == ".csv":
                write_spectrum_csv(path, w_tp, w_t, data)
            else:
                write_binary(path, data, float(w_t[1] - w_t[0]) if w_t.size > 1 else 0.0)
    write_json(out_dir / "metadata.json", _metadata(config, pipe))
    for art in planned:
        path = out_dir / art["path"]
        art["sha256"] = sha256_file(path)
        art["bytes"] = path.stat().st_size
    timings["write"] = time.perf_counter() - t0

    manifest["artifacts"] = planned
    manifest["volatile"] = [TIMING_NAME]
    if config.method == "both":
        manifest["deviation"] = _deviation(grids["closed"], grids["qme"])
    write_json(out_dir / TIMING_NAME, {k: round(v, 6) for k, v in timings.items()})
    write_json(out_dir / MANIFEST_NAME, manifest)
    return manifest


def _metadata(config: JobConfig, pipe: Pipeline) -> dict:
    echo = config.to_dict()
    # the output location is not part of the result; keep it out so relocated reruns checksum identically
    echo["output"].pop("directory")
    return {
        "config": echo,
        "resolved": {
            "beta_fs": beta_fs(config),
            "reference_gap_cm": pipe.gap_cm,
            "carriers_rad_per_fs": list(pipe.pulses.carriers),
            "rotating_frame_rad_per_fs": pipe.gap,
            "population_times_fs": pipe.spec.population_times.tolist(),
            "spectrum_axes_units": "cm^-1",
        },
        "versions": {"fourwave": __version__, "numpy": np.__version__, "scipy": scipy.__version__,
                     "python": platform.python_version()},
        "seed": config.disorder.seed,
    }


def run_oracle(config: JobConfig, channel: int, point) -> complex:
    system = build_system(config)
    basis = diagonalize(system)
    dip = project_dipoles(basis, *np.array(config.pulses.polarizations))
    bath = build_bath(config, basis.n)
    o = config.oracle
    spec = OracleSpec(tuple(o.cutoff) if isinstance(o.cutoff, list) else o.cutoff, o.dim_cap)
    channels = build_channels(config, basis, bath)
    oracle = FockOracle(basis, channels, bath.frequencies, bath.beta, dip, spec)
    return oracle.chi(channel, *point)
