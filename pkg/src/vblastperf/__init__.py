"""Performance bounds and Monte-Carlo simulation for 2 x n (and generalized
l x n) ordered V-BLAST ZF-SIC receivers over Nakagami-m fading.

Layering: specfun (special functions) -> numerics (adaptive quadrature)
-> fading (stage SNR statistics) -> error_rate (ASER / outage closed
forms) -> mcsim (link simulator) -> cli (CSV harness).
"""

from .specfun import EvalResult
from .numerics import QuadratureControl, SeriesControl
from .fading import CorrelationModel, SystemModel
from .error_rate import (
    AserBreakdown,
    AserResult,
    ModulationScheme,
    NumericControls,
)
from .mcsim import MCConfig, SimEstimate

__version__ = "0.1.0"

__all__ = [
    "EvalResult",
    "QuadratureControl",
    "SeriesControl",
    "CorrelationModel",
    "SystemModel",
    "AserBreakdown",
    "AserResult",
    "ModulationScheme",
    "NumericControls",
    "MCConfig",
    "SimEstimate",
    "__version__",
]
