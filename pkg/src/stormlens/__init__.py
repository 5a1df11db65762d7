"""Hurricane attention analytics: n-gram usage rates, HURDAT2 tracks,
decay fits, Bayesian impact regressions and attention-envelope maps."""

__version__ = "0.1.0"
