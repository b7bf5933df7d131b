"""Econometric baselines: GARCH-family MLE, HAR regression, log-SV QMLE."""

from .garch import GARCH_VARIANTS, GarchParams, fit_garch, garch_filter, garch_loglik
from .har import HarParams, fit_har, har_forecast
from .logsv import SvParams, fit_logsv, kalman_filter_ar1, logsv_filter

__all__ = [
    "GARCH_VARIANTS",
    "GarchParams",
    "fit_garch",
    "garch_filter",
    "garch_loglik",
    "HarParams",
    "fit_har",
    "har_forecast",
    "SvParams",
    "fit_logsv",
    "kalman_filter_ar1",
    "logsv_filter",
]
