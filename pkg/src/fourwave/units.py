"""Unit conversions. Inputs are cm^-1 and fs; internally hbar = 1 and energies are rad/fs."""

import numpy as np

SPEED_OF_LIGHT_CM_PER_FS = 2.99792458e-5
BOLTZMANN_CM_PER_K = 0.695034800

# 1 cm^-1 expressed as an angular frequency in rad/fs
CM_TO_RAD_PER_FS = 2.0 * np.pi * SPEED_OF_LIGHT_CM_PER_FS


def wavenumber_to_angular(nu):
    return np.asarray(nu, dtype=float) * CM_TO_RAD_PER_FS


def angular_to_wavenumber(omega):
    return np.asarray(omega, dtype=float) / CM_TO_RAD_PER_FS


def beta_from_temperature(temperature_k: float) -> float:
    """Inverse temperature in fs (units of 1/energy with energy in rad/fs)."""
    if temperature_k <= 0:
        raise ValueError("temperature must be positive")
    return 1.0 / (BOLTZMANN_CM_PER_K * temperature_k * CM_TO_RAD_PER_FS)
