"""Random graphs grown by three-vertex interactions.

Submodules:
  params      model parameters and derived constants
  theory      limiting weight/degree distributions, exact and floating
  simulator   the graph process with weighted sampling kernels
  analysis    empirical-vs-limit comparisons and exponent fits
  experiment  configs and replicated runs
  cli         the ``triadic`` command
"""
__version__ = "0.1.0"

from .params import DerivedConstants, ModelParams, ParameterError, derive  # noqa: E402

__all__ = ["ModelParams", "DerivedConstants", "ParameterError", "derive", "__version__"]
