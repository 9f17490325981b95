"""regime-gauge: diagnostics for choosing model capacity under distribution shift.

The package is organised one module per diagnostic:

* :mod:`regime_gauge.regime_index` -- five-indicator scorecard and tiering
* :mod:`regime_gauge.deff` -- effective-dimensionality estimators
* :mod:`regime_gauge.viability` -- viability gap, boundary and data half-life
* :mod:`regime_gauge.datasets` -- tabular ingestion, standardisation, synthetic shift generator
* :mod:`regime_gauge.models` -- the capacity ladder (logistic, GBM, MLP)
* :mod:`regime_gauge.evaluation` -- AUROC, shift reports, CST and the firewall gate
* :mod:`regime_gauge.synthesis_stats` -- Wilson interval, binomial test, Cohen's h
* :mod:`regime_gauge.rate_reduction` -- rate-reduction objective and gradient
"""

__version__ = "0.1.0"
TOOL_NAME = "regime-gauge"

__all__ = ["__version__", "TOOL_NAME"]
