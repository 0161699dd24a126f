"""Single-exciton Hamiltonian, its eigenbasis, and projected transition dipoles."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import NumericError, ValidationError
from .units import wavenumber_to_angular

_SYMMETRY_TOL = 1e-12
_UNIT_TOL = 1e-12


def _frozen(a, dtype=float):
    a = np.array(a, dtype=dtype)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class SiteSystem:
    """Chromophore sites in the single-excitation manifold.

    ``site_energies`` are the absolute excitation energies ``E_l + E_e`` in cm^-1.
    ``reference_energy`` (``E_e``) defaults to their mean; the exciton Hamiltonian
    ``h_e`` is built from the offsets ``E_l = site_energies - reference_energy``.
    """

    site_energies: np.ndarray
    couplings: np.ndarray
    dipoles: np.ndarray
    reference_energy: float | None = None
    ground_energy: float = 0.0

    def __post_init__(self):
        e = _frozen(self.site_energies)
        if e.ndim != 1 or e.size == 0:
            raise ValidationError("site_energies must be a non-empty vector", "system.site_energies")
        n = e.size
        c = _frozen(self.couplings)
        if c.shape != (n, n):
            raise ValidationError(f"couplings must have shape {(n, n)}, got {c.shape}", "system.couplings")
        mu = _frozen(self.dipoles)
        if mu.shape != (n, 3):
            raise ValidationError(f"dipoles must have shape {(n, 3)}, got {mu.shape}", "system.dipoles")
        for name, a in (("site_energies", e), ("couplings", c), ("dipoles", mu)):
            if not np.all(np.isfinite(a)):
                raise ValidationError("values must be finite", f"system.{name}")
        scale = max(np.max(np.abs(c)), 1.0)
        if np.max(np.abs(c - c.T)) > _SYMMETRY_TOL * scale:
            raise ValidationError("coupling matrix must be symmetric", "system.couplings")
        if np.max(np.abs(np.diag(c))) > 0:
            raise ValidationError("coupling matrix must have zero diagonal", "system.couplings")
        ref = float(np.mean(e)) if self.reference_energy is None else float(self.reference_energy)
        if not np.isfinite(ref) or not np.isfinite(self.ground_energy):
            raise ValidationError("reference and ground energies must be finite", "system")
        object.__setattr__(self, "site_energies", e)
        object.__setattr__(self, "couplings", c)
        object.__setattr__(self, "dipoles", mu)
        object.__setattr__(self, "reference_energy", ref)
        object.__setattr__(self, "ground_energy", float(self.ground_energy))

    @property
    def n_sites(self) -> int:
        return self.site_energies.size

    @property
    def relative_energies(self) -> np.ndarray:
        return self.site_energies - self.reference_energy

    def hamiltonian(self) -> np.ndarray:
        """h_e in the site basis, cm^-1."""
        return np.diag(self.relative_energies) + self.couplings

    def with_site_energies(self, site_energies) -> "SiteSystem":
        """Copy with new site energies; the reference energy is kept fixed."""
        return SiteSystem(site_energies, self.couplings, self.dipoles, self.reference_energy, self.ground_energy)


@dataclass(frozen=True)
class ExcitonBasis:
    energies: np.ndarray  # cm^-1, relative to the reference energy, ascending
    transform: np.ndarray  # U[l, j] = <l|phi_j>
    exciton_dipoles: np.ndarray  # D[j] = sum_l mu_l U*_{lj}, shape (n, 3)
    reference_energy: float
    ground_energy: float = 0.0

    @property
    def n(self) -> int:
        return self.energies.size

    @property
    def omega(self) -> np.ndarray:
        """Exciton energies as angular frequencies (rad/fs)."""
        return wavenumber_to_angular(self.energies)

    @property
    def gap_omega(self) -> float:
        """(E_e - E_g)/hbar in rad/fs."""
        return float(wavenumber_to_angular(self.reference_energy - self.ground_energy))

    def h_e(self) -> np.ndarray:
        """h_e in the exciton basis (rad/fs)."""
        return np.diag(self.omega)


def _fix_signs(vecs: np.ndarray) -> np.ndarray:
    out = vecs.copy()
    for j in range(out.shape[1]):
        col = np.abs(out[:, j])
        big = np.flatnonzero(col >= col.max() * (1 - 1e-12))[0]
        if out[big, j] < 0:
            out[:, j] = -out[:, j]
    return out


def diagonalize(system: SiteSystem) -> ExcitonBasis:
    h = system.hamiltonian()
    try:
        w, v = np.linalg.eigh(h)
    except np.linalg.LinAlgError as exc:
        report = {"condition_number": float(np.linalg.cond(h)), "max_abs": float(np.max(np.abs(h)))}
        raise NumericError(f"eigensolver failed: {exc}", report=report) from exc
    v = _fix_signs(v)
    dip = v.conj().T @ system.dipoles
    return ExcitonBasis(
        energies=_frozen(w),
        transform=_frozen(v),
        exciton_dipoles=_frozen(dip, dtype=v.dtype),
        reference_energy=system.reference_energy,
        ground_energy=system.ground_energy,
    )


@dataclass(frozen=True)
class DipoleProjection:
    """Exciton-basis dipole vectors projected on the four polarizations (1, 2, 3, m)."""

    vectors: np.ndarray  # (4, n), row alpha holds d_{alpha, j}
    polarizations: np.ndarray = field(default_factory=lambda: np.tile([1.0, 0.0, 0.0], (4, 1)))

    def __getitem__(self, alpha: int) -> np.ndarray:
        """Row for pulse index alpha in 1..4 (4 is the measured polarization)."""
        return self.vectors[alpha - 1]

    def scaled(self, s) -> "DipoleProjection":
        return DipoleProjection(self.vectors * s, self.polarizations)


def project_dipoles(basis: ExcitonBasis, e1, e2, e3, em) -> DipoleProjection:
    pols = np.array([e1, e2, e3, em], dtype=float)
    if pols.shape != (4, 3):
        raise ValidationError("polarizations must be four 3-vectors", "pulses.polarizations")
    norms = np.linalg.norm(pols, axis=1)
    bad = np.flatnonzero(np.abs(norms - 1.0) > _UNIT_TOL)
    if bad.size:
        raise ValidationError(f"polarization {bad[0]} has norm {norms[bad[0]]!r}", "pulses.polarizations")
    d = pols @ basis.exciton_dipoles.T
    return DipoleProjection(_frozen(d, dtype=complex), _frozen(pols))


def uniform_projection(basis: ExcitonBasis, direction=(1.0, 0.0, 0.0)) -> DipoleProjection:
    """All four polarizations along ``direction`` (normalized)."""
    e = np.asarray(direction, dtype=float)
    e = e / np.linalg.norm(e)
    return project_dipoles(basis, e, e, e, e)
