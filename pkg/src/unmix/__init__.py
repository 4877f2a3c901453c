"""Single-component spectral recovery (BTEM) and target PLS calibration."""

__version__ = "0.1.0"
