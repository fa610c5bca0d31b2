"""Wireless channel-attribute experts served as JSON-RPC tools.

Lightweight MLP classifiers are trained on synthetic fading scenes, each
detecting one scene attribute (line of sight, high Doppler, Rayleigh,
Rician K=10).  A tool server exposes them over JSON-RPC 2.0, and an agent
host plans which experts to call, fuses their confidences, and answers
attribute queries against a strict binary verdict format.
"""

__version__ = "0.1.0"

from . import channel, data, evaluation, expert, host
from .estimator import MlpExpertClassifier

__all__ = [
    "channel",
    "data",
    "evaluation",
    "expert",
    "host",
    "MlpExpertClassifier",
    "__version__",
]
