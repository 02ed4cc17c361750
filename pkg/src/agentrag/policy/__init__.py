from .backends import (
    ActionSample,
    OracleBackend,
    PolicyBackend,
    RemoteBackend,
    ReplayBackend,
    ToyPlannerBackend,
    act,
)
from .parsing import parse_output
from .prompts import render_prompt
from .toy import FEATURE_DIM, ToyPlannerPolicy, ValueEstimator, featurize, log_prob_of

__all__ = [
    "ActionSample",
    "FEATURE_DIM",
    "OracleBackend",
    "PolicyBackend",
    "RemoteBackend",
    "ReplayBackend",
    "ToyPlannerBackend",
    "ToyPlannerPolicy",
    "ValueEstimator",
    "act",
    "featurize",
    "log_prob_of",
    "parse_output",
    "render_prompt",
]
