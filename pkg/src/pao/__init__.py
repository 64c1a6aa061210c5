"""Position-aware beam optimization for an amplify-and-forward relay.

A ray-traced digital twin predicts per-beam SINR from transmitter
positions; a small neural network recovers those positions from a handful
of SINR measurements, and the relay beam is then optimized on the twin.
"""

from .array import Angles, UpaGeometry, steering_vector
from .channel import SinrModel
from .codebook import Codebook, beam_subset, build_codebook
from .measurement import GroundTruth, MeasurementVector, sweep
from .mlp import MlpModel
from .optim import OptimizerConfig, PaoResult, ga_optimize, gbo_optimize
from .pao import pao_loop
from .scene import Scene, load_scene

__all__ = [
    "Angles", "UpaGeometry", "steering_vector", "SinrModel", "Codebook", "beam_subset", "build_codebook",
    "GroundTruth", "MeasurementVector", "sweep", "MlpModel", "OptimizerConfig", "PaoResult",
    "ga_optimize", "gbo_optimize", "pao_loop", "Scene", "load_scene",
]
__version__ = "0.1.0"
