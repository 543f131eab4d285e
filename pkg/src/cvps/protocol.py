"""Key rate of the receiver-side photon-subtraction protocol and its baseline."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass

import numpy as np

from . import gausinfo
from .covariance import (
    CovarianceElements,
    assemble_gamma_ab2,
    assemble_gamma_efb2,
    baseline_elements,
    elements_with_probability,
)
from .errors import PostSelectionError
from .params import ProtocolParams, SubtractionMode, TruncationConfig

__all__ = [
    "ProtocolParams",
    "SubtractionMode",
    "TruncationConfig",
    "KeyRateResult",
    "DEFAULT_LOSS_DB_PER_KM",
    "distance_to_transmittance",
    "key_rate",
    "key_rate_vs_distance",
]

DEFAULT_LOSS_DB_PER_KM = 0.2
MIN_PROBABILITY = 1e-300


@dataclass(frozen=True)
class KeyRateResult:
    key_rate: float
    post_select_prob: float
    mutual_info: float
    holevo: float
    elements: CovarianceElements
    params_echo: ProtocolParams
    mode: SubtractionMode

    def record(self, **extra):
        """Flat dict for tabular output."""
        out = {
            "variant": self.mode.label,
            "alpha_sq": self.params_echo.alpha_sq,
            "channel_T": self.params_echo.channel_T,
            "P": self.post_select_prob,
            "I": self.mutual_info,
            "chi": self.holevo,
            "K": self.key_rate,
        }
        out.update(self.elements.as_dict())
        out.update(extra)
        return out


def distance_to_transmittance(distance_km, loss_db_per_km=DEFAULT_LOSS_DB_PER_KM):
    if distance_km < 0:
        raise ValueError(f"distance must be >= 0, got {distance_km!r}")
    if not loss_db_per_km > 0:
        raise ValueError("fibre loss must be positive")
    return 10.0 ** (-loss_db_per_km * distance_km / 10.0)


def key_rate(params: ProtocolParams, mode: SubtractionMode) -> KeyRateResult:
    """Lower bound on the secure key rate per pulse under collective attacks.

    Negative values are returned as is.
    """
    if mode.variant == "none":
        prob = 1.0
        el = baseline_elements(params)
    else:
        prob, el = elements_with_probability(params, mode)
        if prob <= MIN_PROBABILITY:
            raise PostSelectionError(f"post-selection probability {prob!r} vanishes")
    assemble_gamma_ab2(el)
    mi = float(gausinfo.mutual_information(el))
    chi = float(gausinfo.holevo_information(assemble_gamma_efb2(el)))
    k = prob * (params.recon_eff * mi - chi)
    return KeyRateResult(k, prob, mi, chi, el, params, mode)


def key_rate_vs_distance(
    params_base: ProtocolParams,
    mode: SubtractionMode,
    distances,
    loss_db_per_km=DEFAULT_LOSS_DB_PER_KM,
    optimize_alpha=False,
):
    """Key rate at each distance; with ``optimize_alpha`` the modulation is
    re-optimized per point (see ``optimize.optimize_alpha``)."""
    results = []
    for d in distances:
        T = distance_to_transmittance(d, loss_db_per_km)
        p = dataclasses.replace(params_base, channel_T=T)
        if optimize_alpha:
            from .optimize import optimize_alpha_at

            p = dataclasses.replace(p, alpha_sq=optimize_alpha_at(p, mode).best_alpha_sq)
        results.append(key_rate(p, mode))
    return results


def check_identity(result: KeyRateResult, tol=1e-12):
    expected = result.post_select_prob * (
        result.params_echo.recon_eff * result.mutual_info - result.holevo
    )
    return np.isclose(result.key_rate, expected, rtol=0, atol=tol)
