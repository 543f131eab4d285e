"""Secure key rates for continuous-variable QKD with photon subtraction at the receiver."""

from .errors import DomainError, PostSelectionError, UnphysicalError
from .params import ProtocolParams, SubtractionMode, TruncationConfig, TruncationWarning
from .protocol import KeyRateResult, distance_to_transmittance, key_rate, key_rate_vs_distance

__version__ = "0.1.0"
