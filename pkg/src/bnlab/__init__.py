"""bnlab: structure learning and evaluation workbench for discrete Bayesian networks."""

__version__ = "0.1.0"
