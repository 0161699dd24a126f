"""Result files: CSV, raw little-endian binary with a 64-byte header, JSON, checksums."""

from __future__ import annotations

import hashlib
import json
import struct
from pathlib import Path

import numpy as np

from .errors import ValidationError

MAGIC = b"FWMX"
BINARY_VERSION = 1
HEADER_SIZE = 64
_HEADER = struct.Struct("<4sIQQQd")  # magic, version, 3 dims, step


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def write_response_csv(path, spec, values: np.ndarray):
    """Rows ``tau,Tp,tau_prime,re,im`` in row-major (tau, T_p, tau') order."""
    lines = ["tau,Tp,tau_prime,re,im"]
    for i, tau in enumerate(spec.tau):
        for p, tp in enumerate(spec.population_times):
            for q, taup in enumerate(spec.tau_prime):
                v = values[i, p, q]
                lines.append(",".join((_fmt(tau), _fmt(tp), _fmt(taup), _fmt(v.real), _fmt(v.imag))))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def write_spectrum_csv(path, w_tau_prime, w_tau, values: np.ndarray):
    """Rows ``w_tau_prime,w_tau,re,im``; ``values`` is (len(w_tau_prime), len(w_tau))."""
    lines = ["w_tau_prime,w_tau,re,im"]
    for i, a in enumerate(w_tau_prime):
        for j, b in enumerate(w_tau):
            v = values[i, j]
            lines.append(",".join((_fmt(a), _fmt(b), _fmt(v.real), _fmt(v.imag))))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def write_binary(path, values: np.ndarray, step: float):
    """64-byte header then interleaved complex128, row-major. Arrays of rank < 3 are padded with unit dims."""
    a = np.asarray(values, dtype="<c16")
    if a.ndim > 3:
        raise ValidationError("binary output supports at most three dimensions")
    dims = a.shape + (1,) * (3 - a.ndim)
    header = _HEADER.pack(MAGIC, BINARY_VERSION, *dims, float(step))
    header = header + b"\0" * (HEADER_SIZE - len(header))
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(np.ascontiguousarray(a).tobytes())


def read_binary(path):
    """Returns ``(array, step)``."""
    raw = Path(path).read_bytes()
    if len(raw) < HEADER_SIZE:
        raise ValidationError("file shorter than the binary header")
    magic, version, d0, d1, d2, step = _HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise ValidationError(f"bad magic {magic!r}")
    if version != BINARY_VERSION:
        raise ValidationError(f"unsupported binary version {version}")
    data = np.frombuffer(raw[HEADER_SIZE:], dtype="<c16")
    if data.size != d0 * d1 * d2:
        raise ValidationError(f"payload has {data.size} values, header promises {d0 * d1 * d2}")
    return data.reshape(d0, d1, d2), step


def write_json(path, obj):
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()
