"""Planted factor graph models: exact finite-size oracles, Bethe functional
estimation and threshold diagnostics."""
from .errors import InvalidArgument, ResourceLimitError
from .kernels import BACKEND
from .model import (ModelSpec, Simplex, WeightDistribution, WeightFunction, XiSup, check_bal,
                    constant_model, load_model, make_model, model_hash, phi_annealed, save_model,
                    xi, xi_sup)

__version__ = "0.1.0"

__all__ = [
    "BACKEND", "InvalidArgument", "ModelSpec", "ResourceLimitError", "Simplex",
    "WeightDistribution", "WeightFunction", "XiSup", "__version__", "check_bal",
    "constant_model", "load_model", "make_model", "model_hash", "phi_annealed",
    "save_model", "xi", "xi_sup",
]
