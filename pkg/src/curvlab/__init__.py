"""Curvature invariants of distributions and verification harness for their integral formulas."""

__version__ = "0.1.0"

from . import kernels  # noqa: E402  (selects the compiled or pure-Python core)
from .adapted import DistributionSet, adapted_frame, fundamental_data  # noqa: E402
from .config import RunConfig, load_config, loads_config  # noqa: E402
from .errors import (ConfigError, CurvlabError, ExprDomainError, ExprSyntaxError,  # noqa: E402
                     GeometryError)
from .expr import ScalarField, parse  # noqa: E402
from .geometry import MetricChart, curvature_point  # noqa: E402
from .harness import CheckReport, CheckSpec, Settings, run_check  # noqa: E402
from .immersion import ImmersionSpec, cal_H, second_fundamental  # noqa: E402
from .invariants import Budget, SubspaceTuple, delta_chen, delta_m, invariant  # noqa: E402
from .runner import RunReport, run  # noqa: E402

__all__ = [
    "__version__", "kernels", "DistributionSet", "adapted_frame", "fundamental_data", "RunConfig",
    "load_config", "loads_config", "ConfigError", "CurvlabError", "ExprDomainError",
    "ExprSyntaxError", "GeometryError", "ScalarField", "parse", "MetricChart", "curvature_point",
    "CheckReport", "CheckSpec", "Settings", "run_check", "ImmersionSpec", "cal_H",
    "second_fundamental", "Budget", "SubspaceTuple", "delta_chen", "delta_m", "invariant",
    "RunReport", "run",
]
