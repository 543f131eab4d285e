"""Parameter containers for the photon-subtraction CV-QKD model.

All photon numbers are mean photon numbers per mode; every variance
derived from them is in shot-noise units (vacuum variance 1).
"""

from __future__ import annotations

import dataclasses
import warnings
from dataclasses import dataclass, field

from .errors import DomainError

PLACEMENTS = ("subtraction_tap", "homodyne", "none")


class TruncationWarning(UserWarning):
    """Probability mass beyond the Fock cutoff exceeds the configured tolerance."""


@dataclass(frozen=True)
class TruncationConfig:
    n_max: int = 30
    tail_tolerance: float = 1e-6

    def __post_init__(self):
        if int(self.n_max) != self.n_max or self.n_max < 1:
            raise DomainError(f"n_max must be a positive integer, got {self.n_max!r}")
        if not self.tail_tolerance > 0:
            raise DomainError("tail_tolerance must be positive")

    def tail_mass(self, mean_photons):
        """Thermal probability of finding more than ``n_max`` photons."""
        if mean_photons <= 0:
            return 0.0
        return (mean_photons / (1.0 + mean_photons)) ** (self.n_max + 1)

    def check(self, mean_photons, stacklevel=3):
        tail = self.tail_mass(mean_photons)
        if tail > self.tail_tolerance:
            warnings.warn(
                f"truncation at n_max={self.n_max} drops {tail:.3g} of the thermal "
                f"distribution with mean {mean_photons:g} "
                f"(tolerance {self.tail_tolerance:g})",
                TruncationWarning,
                stacklevel=stacklevel,
            )
        return tail


@dataclass(frozen=True)
class SubtractionMode:
    """Which receiver variant is simulated.

    ``variant`` is one of ``"none"``, ``"counter"`` or ``"detector"``;
    ``photons`` is the number of photons a counter must register.
    """

    variant: str = "none"
    photons: int = 0

    def __post_init__(self):
        if self.variant not in ("none", "counter", "detector"):
            raise DomainError(f"unknown subtraction variant {self.variant!r}")
        if self.variant == "counter" and self.photons < 1:
            raise DomainError("a photon counter must post-select on s >= 1 photons")

    @classmethod
    def none(cls):
        return cls("none", 0)

    @classmethod
    def counter(cls, s=1):
        return cls("counter", int(s))

    @classmethod
    def detector(cls):
        return cls("detector", 0)

    @classmethod
    def parse(cls, text):
        """Parse ``none``, ``detector``, ``counter`` or ``counter:S``."""
        text = text.strip().lower()
        if text in ("none", "conventional"):
            return cls.none()
        if text == "detector":
            return cls.detector()
        if text.startswith("counter"):
            _, _, s = text.partition(":")
            try:
                return cls.counter(int(s) if s else 1)
            except ValueError:
                raise DomainError(f"bad photon number in {text!r}") from None
        raise DomainError(f"unknown subtraction variant {text!r}")

    @property
    def label(self):
        if self.variant == "counter":
            return f"counter:{self.photons}"
        return self.variant


@dataclass(frozen=True)
class ProtocolParams:
    """Physical and post-processing parameters of one operating point.

    Defaults are the simulation settings of the photon-subtraction study:
    reconciliation efficiency 0.95, detector efficiency 0.68, channel
    noise 0.001 photons and tap transmittance 0.9, sums cut at 30.
    """

    alpha_sq: float = 1.0
    beta_sq: float = 0.001
    channel_T: float = 1.0
    tap_T1: float = 0.9
    recon_eff: float = 0.95
    det_eff: float = 0.68
    trunc: TruncationConfig = field(default_factory=TruncationConfig)
    det_eff_placement: str = "subtraction_tap"

    def __post_init__(self):
        if not self.alpha_sq >= 0:
            raise DomainError(f"alpha_sq must be >= 0, got {self.alpha_sq!r}")
        if not self.beta_sq >= 0:
            raise DomainError(f"beta_sq must be >= 0, got {self.beta_sq!r}")
        for name in ("channel_T", "tap_T1", "recon_eff", "det_eff"):
            value = getattr(self, name)
            if not 0.0 < value <= 1.0:
                raise DomainError(f"{name} must lie in (0, 1], got {value!r}")
        if self.det_eff_placement not in PLACEMENTS:
            raise DomainError(f"det_eff_placement must be one of {PLACEMENTS}")
        # skip __post_init__ and the generated __init__
        self.trunc.check(max(self.alpha_sq, self.beta_sq), stacklevel=4)

    @property
    def n_max(self):
        return self.trunc.n_max

    def replace(self, **changes):
        return dataclasses.replace(self, **changes)

    def as_dict(self):
        d = dataclasses.asdict(self)
        d["trunc"] = dict(d["trunc"])
        return d
