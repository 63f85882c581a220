"""External-scorer adapter for the metatune wire protocol.

Wraps a sequence-to-sequence language model (or a deterministic stub) and
answers score/train/save/load requests as line-delimited JSON on
stdin/stdout. The probability of "Yes" is normalized over the first
decoded token: p = P(Yes) / (P(Yes) + P(No)).
"""

__version__ = "0.1.0"

from .config import AdapterConfig, ConfigError
from .models import build_model
from .serve import serve
