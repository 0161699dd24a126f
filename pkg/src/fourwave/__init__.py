"""Third-order response functions and 2D spectra of exciton systems coupled to harmonic baths."""

__version__ = "0.1.0"
