"""Robot-aware visual model-predictive control on a deterministic pushing tabletop."""

__version__ = "0.1.0"
