"""Spin-squeezing entanglement criteria and Gaussian QND Leggett-Garg simulations."""

from . import extreme, gaussian, lg, oracle, spin_ops, ssi, states
from .states import MomentData

__all__ = ["extreme", "gaussian", "lg", "oracle", "spin_ops", "ssi", "states", "MomentData"]
__version__ = "0.1.0"
