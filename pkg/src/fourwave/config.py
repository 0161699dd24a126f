"""Job configuration: JSON text in, validated JobConfig out.

Energies and frequencies are cm^-1, times fs, temperature K. Every block is
checked for unknown keys; errors carry a dotted path such as ``bath.channels[0]``.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field

import numpy as np

from .bath import SPECTRAL_MODELS
from .errors import ConfigError

METHODS = ("closed", "qme", "both")
FORMATS = ("csv", "binary")


def _keys(block, allowed, path):
    if not isinstance(block, dict):
        raise ConfigError("expected an object", path)
    unknown = sorted(set(block) - set(allowed))
    if unknown:
        raise ConfigError(f"unknown keys {unknown}", path)


def _matrix(value, path, shape=None):
    try:
        a = np.array(value, dtype=float)
    except (TypeError, ValueError):
        raise ConfigError("expected a numeric array", path) from None
    if shape is not None and a.shape != shape:
        raise ConfigError(f"expected shape {shape}, got {a.shape}", path)
    if not np.all(np.isfinite(a)):
        raise ConfigError("values must be finite", path)
    return a


def _number(value, path, positive=False, allow_zero=True):
    if isinstance(value, bool) or not isinstance(value, (int, float)) or not np.isfinite(value):
        raise ConfigError("expected a finite number", path)
    if positive and (value < 0 or (value == 0 and not allow_zero)):
        raise ConfigError("must be positive", path)
    return float(value)


def _count(value, path, minimum=1):
    if isinstance(value, bool) or not isinstance(value, int) or value < minimum:
        raise ConfigError(f"expected an integer >= {minimum}", path)
    return int(value)


@dataclass(frozen=True)
class SystemBlock:
    site_energies: list
    couplings: list
    dipoles: list
    reference_energy: float | None = None
    ground_energy: float = 0.0


@dataclass(frozen=True)
class ChannelBlock:
    operator: list
    weights: list
    basis: str = "exciton"


@dataclass(frozen=True)
class BathBlock:
    temperature: float | None = None
    beta: float | None = None  # 1/cm^-1
    modes: list | None = None  # cm^-1
    spectral_density: dict | None = None
    diagonal_couplings: list | None = None
    correlation: str = "shared"
    channels: list = field(default_factory=list)


@dataclass(frozen=True)
class PulsesBlock:
    carriers: list | None = None  # cm^-1; default: the reference gap for all three
    polarizations: list = field(default_factory=lambda: [[1.0, 0.0, 0.0]] * 4)
    envelopes: list = field(default_factory=lambda: ["impulsive"] * 3)
    centers: list = field(default_factory=lambda: [0.0, 0.0, 0.0])


@dataclass(frozen=True)
class GridsBlock:
    dt: float
    n_tau: int
    n_tau_prime: int
    population_times: list = field(default_factory=lambda: [0.0, 50.0, 100.0, 200.0])


@dataclass(frozen=True)
class DisorderBlock:
    sigma: float | list = 0.0
    samples: int = 1
    seed: int = 0


@dataclass(frozen=True)
class OutputBlock:
    directory: str = "fourwave-out"
    formats: list = field(default_factory=lambda: ["csv"])


@dataclass(frozen=True)
class OracleBlock:
    cutoff: int | list = 20
    dim_cap: int = 4096


@dataclass(frozen=True)
class JobConfig:
    system: SystemBlock
    bath: BathBlock
    grids: GridsBlock
    pulses: PulsesBlock = field(default_factory=PulsesBlock)
    method: str = "closed"
    disorder: DisorderBlock = field(default_factory=DisorderBlock)
    output: OutputBlock = field(default_factory=OutputBlock)
    oracle: OracleBlock = field(default_factory=OracleBlock)
    memory_cap_bytes: int = 2 * 1024 ** 3

    def to_dict(self) -> dict:
        return asdict(self)

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @property
    def n_sites(self) -> int:
        return len(self.system.site_energies)


TOP_KEYS = ("system", "bath", "grids", "pulses", "method", "disorder", "output", "oracle", "memory_cap_bytes")


def _system(block) -> SystemBlock:
    p = "system"
    _keys(block, ("site_energies", "couplings", "dipoles", "reference_energy", "ground_energy"), p)
    for k in ("site_energies", "couplings", "dipoles"):
        if k not in block:
            raise ConfigError("missing required key", f"{p}.{k}")
    e = _matrix(block["site_energies"], f"{p}.site_energies")
    if e.ndim != 1 or e.size == 0:
        raise ConfigError("expected a non-empty list", f"{p}.site_energies")
    n = e.size
    c = _matrix(block["couplings"], f"{p}.couplings", (n, n))
    if np.max(np.abs(c - c.T)) > 1e-12 * max(1.0, np.max(np.abs(c))):
        raise ConfigError("coupling matrix must be symmetric", f"{p}.couplings")
    if np.any(np.diag(c) != 0):
        raise ConfigError("coupling matrix must have zero diagonal", f"{p}.couplings")
    mu = _matrix(block["dipoles"], f"{p}.dipoles", (n, 3))
    ref = block.get("reference_energy")
    ref = None if ref is None else _number(ref, f"{p}.reference_energy")
    g = _number(block.get("ground_energy", 0.0), f"{p}.ground_energy")
    return SystemBlock(e.tolist(), c.tolist(), mu.tolist(), ref, g)


def _bath(block, n: int) -> BathBlock:
    p = "bath"
    _keys(block, ("temperature", "beta", "modes", "spectral_density", "diagonal_couplings", "correlation",
                  "channels"), p)
    temp, beta = block.get("temperature"), block.get("beta")
    if (temp is None) == (beta is None):
        raise ConfigError("give exactly one of temperature (K) or beta (1/cm^-1)", p)
    if temp is not None:
        temp = _number(temp, f"{p}.temperature")
        if temp <= 0:
            raise ConfigError("must be positive", f"{p}.temperature")
    if beta is not None:
        beta = _number(beta, f"{p}.beta")
        if beta <= 0:
            raise ConfigError("must be positive", f"{p}.beta")
    modes, sd = block.get("modes"), block.get("spectral_density")
    if (modes is None) == (sd is None):
        raise ConfigError("give exactly one of modes or spectral_density", p)
    if modes is not None:
        w = _matrix(modes, f"{p}.modes")
        if w.ndim != 1 or w.size == 0 or np.any(w <= 0):
            raise ConfigError("mode frequencies must be a non-empty list of positive numbers", f"{p}.modes")
        modes = w.tolist()
        n_modes = w.size
    else:
        sp = f"{p}.spectral_density"
        _keys(sd, ("model", "reorganization", "eta", "cutoff", "n_modes"), sp)
        model = sd.get("model")
        if model not in SPECTRAL_MODELS:
            raise ConfigError(f"unsupported model {model!r}; expected one of {list(SPECTRAL_MODELS)}", f"{sp}.model")
        need = ("reorganization", "cutoff") if model == "drude-lorentz" else ("eta", "cutoff")
        extra = {"eta"} if model == "drude-lorentz" else {"reorganization"}
        bad = sorted(extra & set(sd))
        if bad:
            raise ConfigError(f"keys {bad} do not apply to {model}", sp)
        sd = {"model": model, "n_modes": _count(sd.get("n_modes", 50), f"{sp}.n_modes")}
        for k in need:
            if k not in block["spectral_density"]:
                raise ConfigError("missing required key", f"{sp}.{k}")
            v = _number(block["spectral_density"][k], f"{sp}.{k}")
            if v <= 0:
                raise ConfigError("must be positive", f"{sp}.{k}")
            sd[k] = v
        n_modes = sd["n_modes"]
    corr = block.get("correlation", "shared")
    if corr not in ("shared", "independent"):
        raise ConfigError("expected 'shared' or 'independent'", f"{p}.correlation")
    diag = block.get("diagonal_couplings")
    if diag is not None:
        if sd is not None:
            raise ConfigError("spectral_density fixes the couplings; drop diagonal_couplings", f"{p}.diagonal_couplings")
        g = _matrix(diag, f"{p}.diagonal_couplings")
        if g.ndim == 1:
            g = g[None, :]
        if g.ndim != 2 or g.shape[1] != n_modes or g.shape[0] not in (1, n):
            raise ConfigError(f"expected 1 or {n} rows of {n_modes} couplings, got shape {g.shape}",
                              f"{p}.diagonal_couplings")
        if g.shape[0] == n and corr == "independent":
            raise ConfigError("independent expansion needs a single coupling row", f"{p}.correlation")
        diag = g.tolist()
    channels = []
    for i, ch in enumerate(block.get("channels", [])):
        cp = f"{p}.channels[{i}]"
        _keys(ch, ("operator", "weights", "basis"), cp)
        if "operator" not in ch or "weights" not in ch:
            raise ConfigError("channels need operator and weights", cp)
        try:
            op = np.array(ch["operator"], dtype=float)
        except (TypeError, ValueError):
            raise ConfigError("operator must be a real numeric matrix", cp) from None
        if op.shape != (n, n):
            raise ConfigError(f"operator must have shape {(n, n)}, got {op.shape}", cp)
        if not np.all(np.isfinite(op)) or np.max(np.abs(op - op.T)) > 1e-12 * max(1.0, np.max(np.abs(op))):
            raise ConfigError("operator must be finite and symmetric", cp)
        wts = _matrix(ch["weights"], f"{cp}.weights")
        if wts.shape != (n_modes,):
            raise ConfigError(f"expected {n_modes} weights, got shape {wts.shape}", f"{cp}.weights")
        basis = ch.get("basis", "exciton")
        if basis not in ("exciton", "site"):
            raise ConfigError("expected 'exciton' or 'site'", f"{cp}.basis")
        channels.append(ChannelBlock(op.tolist(), wts.tolist(), basis))
    if diag is None and sd is None and not channels:
        raise ConfigError("no exciton-bath coupling given (diagonal_couplings, spectral_density or channels)", p)
    return BathBlock(temp, beta, modes, sd, diag, corr, channels)


def _pulses(block) -> PulsesBlock:
    p = "pulses"
    _keys(block, ("carriers", "polarizations", "envelopes", "centers"), p)
    d = PulsesBlock()
    car = block.get("carriers")
    if car is not None:
        car = _matrix(car, f"{p}.carriers", (3,)).tolist()
    pol = _matrix(block.get("polarizations", d.polarizations), f"{p}.polarizations", (4, 3))
    norms = np.linalg.norm(pol, axis=1)
    for i, nv in enumerate(norms):
        if abs(nv - 1.0) > 1e-12:
            raise ConfigError(f"polarization has norm {nv!r}", f"{p}.polarizations[{i}]")
    env = list(block.get("envelopes", d.envelopes))
    if len(env) != 3:
        raise ConfigError("expected three envelopes", f"{p}.envelopes")
    for i, e in enumerate(env):
        if e != "impulsive":
            env[i] = _number(e, f"{p}.envelopes[{i}]")
            if env[i] <= 0:
                raise ConfigError("FWHM must be positive", f"{p}.envelopes[{i}]")
    cen = _matrix(block.get("centers", d.centers), f"{p}.centers", (3,))
    if not (cen[0] <= cen[1] <= cen[2]):
        raise ConfigError("pulse centers must be ordered", f"{p}.centers")
    return PulsesBlock(car, pol.tolist(), env, cen.tolist())


def _grids(block) -> GridsBlock:
    p = "grids"
    _keys(block, ("dt", "n_tau", "n_tau_prime", "population_times"), p)
    for k in ("dt", "n_tau", "n_tau_prime"):
        if k not in block:
            raise ConfigError("missing required key", f"{p}.{k}")
    dt = _number(block["dt"], f"{p}.dt")
    if dt <= 0:
        raise ConfigError("must be positive", f"{p}.dt")
    tps = block.get("population_times", GridsBlock(1.0, 1, 1).population_times)
    tps = _matrix(tps, f"{p}.population_times")
    if tps.ndim != 1 or tps.size == 0 or np.any(tps < 0):
        raise ConfigError("expected a non-empty list of non-negative times", f"{p}.population_times")
    return GridsBlock(dt, _count(block["n_tau"], f"{p}.n_tau"), _count(block["n_tau_prime"], f"{p}.n_tau_prime"),
                      tps.tolist())


def _disorder(block, n) -> DisorderBlock:
    p = "disorder"
    _keys(block, ("sigma", "samples", "seed"), p)
    sigma = block.get("sigma", 0.0)
    if isinstance(sigma, list):
        s = _matrix(sigma, f"{p}.sigma")
        if s.shape != (n,):
            raise ConfigError(f"expected {n} values", f"{p}.sigma")
        if np.any(s < 0):
            raise ConfigError("must be >= 0", f"{p}.sigma")
        sigma = s.tolist()
    else:
        sigma = _number(sigma, f"{p}.sigma")
        if sigma < 0:
            raise ConfigError("must be >= 0", f"{p}.sigma")
    seed = block.get("seed", 0)
    if isinstance(seed, bool) or not isinstance(seed, int) or not 0 <= seed < 2 ** 64:
        raise ConfigError("expected a 64-bit unsigned integer", f"{p}.seed")
    return DisorderBlock(sigma, _count(block.get("samples", 1), f"{p}.samples"), seed)


def _output(block) -> OutputBlock:
    p = "output"
    _keys(block, ("directory", "formats"), p)
    d = OutputBlock()
    directory = block.get("directory", d.directory)
    if not isinstance(directory, str) or not directory:
        raise ConfigError("expected a non-empty string", f"{p}.directory")
    formats = block.get("formats", d.formats)
    if not isinstance(formats, list) or not formats or any(f not in FORMATS for f in formats):
        raise ConfigError(f"expected a non-empty subset of {list(FORMATS)}", f"{p}.formats")
    return OutputBlock(directory, sorted(set(formats), key=FORMATS.index))


def _oracle(block) -> OracleBlock:
    p = "oracle"
    _keys(block, ("cutoff", "dim_cap"), p)
    cut = block.get("cutoff", 20)
    if isinstance(cut, list):
        cut = [_count(c, f"{p}.cutoff[{i}]", 2) for i, c in enumerate(cut)]
    else:
        cut = _count(cut, f"{p}.cutoff", 2)
    return OracleBlock(cut, _count(block.get("dim_cap", 4096), f"{p}.dim_cap"))


def from_dict(data: dict) -> JobConfig:
    _keys(data, TOP_KEYS, "config")
    for k in ("system", "bath", "grids"):
        if k not in data:
            raise ConfigError("missing required block", k)
    system = _system(data["system"])
    n = len(system.site_energies)
    method = data.get("method", "closed")
    if method not in METHODS:
        raise ConfigError(f"expected one of {list(METHODS)}", "method")
    bath = _bath(data["bath"], n)
    if method in ("closed", "both") and bath.diagonal_couplings is None and bath.spectral_density is None:
        raise ConfigError("closed forms need diagonal couplings or a spectral density", "bath.diagonal_couplings")
    cap = data.get("memory_cap_bytes", 2 * 1024 ** 3)
    cap = _count(cap, "memory_cap_bytes")
    return JobConfig(
        system=system,
        bath=bath,
        grids=_grids(data["grids"]),
        pulses=_pulses(data.get("pulses", {})),
        method=method,
        disorder=_disorder(data.get("disorder", {}), n),
        output=_output(data.get("output", {})),
        oracle=_oracle(data.get("oracle", {})),
        memory_cap_bytes=cap,
    )


def parse_config(text: str) -> JobConfig:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON: {exc}", "config") from None
    return from_dict(data)


def load_config(path) -> JobConfig:
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read())


def with_overrides(config: JobConfig, method=None, directory=None, seed=None) -> JobConfig:
    d = config.to_dict()
    if method is not None:
        d["method"] = method
    if directory is not None:
        d["output"]["directory"] = str(directory)
    if seed is not None:
        d["disorder"]["seed"] = seed
    return from_dict(_strip_none(d))


def _strip_none(d):
    # asdict keeps None for optional fields; the parser treats absence and None alike only for some keys
    if isinstance(d, dict):
        return {k: _strip_none(v) for k, v in d.items() if v is not None and not (k == "channels" and v == [])}
    if isinstance(d, list):
        return [_strip_none(v) for v in d]
    return d


def serialize(config: JobConfig) -> str:
    """JSON text that parses back to an equal JobConfig."""
    return json.dumps(_strip_none(config.to_dict()), indent=2, sort_keys=True)
