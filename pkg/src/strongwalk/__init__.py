"""Pathwise discrete approximation of the Black-Scholes-Merton model on
nested twist-and-shrink random walks."""

__version__ = "0.1.0"

from .kernels import backend_name
from .market import MarketParams, build_level
from .pricing import Claim
from .walk import CoinMatrix, NestedWalks

__all__ = [
    "CoinMatrix",
    "Claim",
    "MarketParams",
    "NestedWalks",
    "backend_name",
    "build_level",
    "__version__",
]
