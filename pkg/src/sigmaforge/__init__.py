"""sigmaforge: GARCH-hybrid recurrent volatility cells, econometric baselines,
and a reproducible forecast-evaluation pipeline."""

__version__ = "0.1.0"
