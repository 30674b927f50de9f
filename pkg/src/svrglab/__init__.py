"""svrglab: variance-reduced stochastic gradient methods under arbitrary
sampling, with closed-form parameter tuning and an experiment harness."""

__version__ = "0.1.0"
