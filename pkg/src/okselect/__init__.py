"""Online kernel selection under bandit feedback.

OKS, OKS++ and IOKS over Gaussian-kernel RKHS arms, their random-feature
variants, and a harness for streaming classification/regression runs.
"""

__version__ = "0.1.0"

from .core import BACKEND
from .data import Dataset, Task, load_named, parse_csv, parse_libsvm, permute, preprocess
from .engine import OnlineRun, RunSummary, TrialRecord, offline_oracle, run_stream, step
from .errors import (InvalidConfigError, InvalidInputError, InvalidTaskError, NumericalError,
                     OkselectError, ParseError, RunError, StateCorruptionError, UnsupportedError)
from .harness import RunConfig, ResultTable, run_experiment
from .hypotheses import RfHypothesis, RkhsHypothesis
from .kernels import FeatureMap, KernelSpec, feature_vector, kernel_eval, sample_feature_map
from .losses import LossFunction, LossKind, make_loss
from .selectors import IOKSSelector, OKSPlusPlusSelector, OKSSelector, SelectorState
