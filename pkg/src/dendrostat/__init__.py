"""Statistical tools for tree-ring width series.

Subpackages cover ARMA fitting and AIC order selection (:mod:`dendrostat.arma`),
the order-selection Monte Carlo grid (:mod:`dendrostat.mcstudy`), regression
benchmarking (:mod:`dendrostat.mlbench`) and GEV extreme-value analysis
(:mod:`dendrostat.evt`).
"""

__version__ = "0.1.0"
