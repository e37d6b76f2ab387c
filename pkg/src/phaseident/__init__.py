"""Two-phase PDE identification with phase-boundary localization and
uncertainty quantification from noisy space-time observations."""

__version__ = "0.1.0"
