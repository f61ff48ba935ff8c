"""Urban tree species classification from aerial tiles.

A numpy implementation of a small family of CNNs (N blocks of two
conv+ReLU layers and a max-pool, then FC+ReLU and an output FC), the
optimizers and initializers swept over them, and the pipeline that turns a
municipal tree inventory into a labelled aerial-image dataset.
"""

from .augment import AugmentParams, augment, oversample_plan
from .checkpoint import Checkpoint
from .initializers import InitializerKind, fan_of, initialize
from .metrics import EvalReport, confusion_matrix
from .model import ModelSpec, build, compute_class_weights, count_parameters, forward, shape_trace
from .optimizers import OptimizerState, apply_step, init_state
from .rng import substream
from .training import TrainConfig, TrainHistory, cross_validate, evaluate, sweep, train

__version__ = "0.1.0"
