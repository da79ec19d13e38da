"""Mean-field Bayesian optimisation: MF-GP-UCB, benchmark environments and baselines."""
from ._backend import NAME as BACKEND

__version__ = "0.1.0"
__all__ = ["BACKEND", "__version__"]
