"""Generalization-bound machinery for multi-task learning with
multi-graph dependent data: fractional covers and chromatic numbers,
Bennett/Talagrand tail bounds with Monte Carlo verification, localized
Rademacher complexity with sub-root fixed points, spectrum-based
localization-radius bounds, and the Macro-AUC bound-comparison pipeline.
"""

__version__ = "0.1.0"
