"""Paper-style figures from force-displacement curve CSVs."""

from .curves import CurveFile, SchemaError, load_curve
from .plots import STYLE_PRESETS, plot_curves

__all__ = ["CurveFile", "SchemaError", "load_curve", "STYLE_PRESETS", "plot_curves"]
__version__ = "0.1.0"
