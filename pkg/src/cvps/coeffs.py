"""Scalar kernels of the Fock-basis expansion and the tables built from them.

The joint state after the channel beam splitter (transmittance ``T``) and
the subtraction tap (transmittance ``T1``) is

    sum_{n,k,m,l,s} alpha_n beta_m (-1)^(k+s) gamma^T_{n,k} gamma^T_{m,l}
        zeta_{n,k,m,l} gamma^T1_{n-k+l,s} |n, n-k+l-s, k+m-l, m, s>

over the modes (A, B2, E, F, C).  Every moment needed for the key rate is
a quadruple sum over (n, k, m, l) of "interference" terms ``J+`` / ``J-``
that pair kets sharing the same output photon numbers.

Binomials go through a log-gamma table so that cutoffs of 30 (and the
resulting photon numbers up to 60) never overflow.
"""

from __future__ import annotations

from collections import namedtuple
from functools import lru_cache

import numpy as np
from scipy.special import gammaln, xlogy

from .errors import DomainError
from .params import ProtocolParams, SubtractionMode, TruncationConfig

__all__ = [
    "TruncationConfig",
    "IndexTuple",
    "log_binom",
    "tmsv_coeff",
    "tmsv_amplitudes",
    "bs_coeff",
    "bs_table",
    "zeta_coeff",
    "zeta_table",
    "j_plus",
    "j_minus",
    "click_weights",
    "tap_factors",
    "amplitude_kernel",
    "subtraction_probability",
]

IndexTuple = namedtuple("IndexTuple", "n k m l")


@lru_cache(maxsize=None)
def _log_factorials(size):
    table = gammaln(np.arange(size + 1, dtype=float) + 1.0)
    table.flags.writeable = False
    return table


def log_binom(n, k):
    """Natural log of C(n, k) for integer arrays with 0 <= k <= n."""
    n = np.asarray(n)
    k = np.asarray(k)
    lf = _log_factorials(int(max(np.max(n), 1)))
    return lf[n] - lf[k] - lf[n - k]


def _check_int(name, value):
    if int(value) != value or value < 0:
        raise DomainError(f"{name} must be a non-negative integer, got {value!r}")
    return int(value)


def _check_transmittance(T):
    if not 0.0 <= T <= 1.0:
        raise DomainError(f"transmittance must lie in [0, 1], got {T!r}")


def tmsv_coeff(n, mean_photons):
    """Fock amplitude sqrt(mu^n / (1+mu)^(n+1)) of a two-mode squeezed vacuum."""
    n = _check_int("n", n)
    if not mean_photons >= 0:
        raise DomainError(f"mean photon number must be >= 0, got {mean_photons!r}")
    mu = float(mean_photons)
    return float(np.exp(0.5 * (xlogy(n, mu) - (n + 1) * np.log1p(mu))))


def tmsv_amplitudes(mean_photons, n_max):
    """Vector of ``tmsv_coeff(n, mean_photons)`` for n = 0..n_max."""
    if not mean_photons >= 0:
        raise DomainError(f"mean photon number must be >= 0, got {mean_photons!r}")
    n = np.arange(n_max + 1, dtype=float)
    return np.exp(0.5 * (xlogy(n, mean_photons) - (n + 1) * np.log1p(mean_photons)))


def bs_coeff(T, n, k):
    """gamma^T_{n,k} = sqrt(C(n,k)) T^((n-k)/2) (1-T)^(k/2)."""
    _check_transmittance(T)
    n = _check_int("n", n)
    k = _check_int("k", k)
    if k > n:
        raise DomainError(f"need k <= n, got n={n}, k={k}")
    log_val = 0.5 * (log_binom(n, k) + xlogy(n - k, T) + xlogy(k, 1.0 - T))
    return float(np.exp(log_val))


def bs_table(T, size):
    """Array ``G[n, k] = gamma^T_{n,k}`` for n, k < size; zero where k > n."""
    _check_transmittance(T)
    n = np.arange(size)[:, None]
    k = np.arange(size)[None, :]
    valid = k <= n
    kk = np.where(valid, k, 0)
    log_val = 0.5 * (log_binom(n, kk) + xlogy(n - kk, T) + xlogy(kk, 1.0 - T))
    return np.where(valid, np.exp(log_val), 0.0)


def zeta_coeff(n, k, m, l):
    """zeta_{n,k,m,l} = sqrt(C(n-k+l, l)) sqrt(C(k+m-l, k))."""
    n, k, m, l = (_check_int(name, v) for name, v in zip("nkml", (n, k, m, l)))
    if k > n or l > m:
        raise DomainError(f"need k <= n and l <= m, got {(n, k, m, l)}")
    return float(np.exp(0.5 * (log_binom(n - k + l, l) + log_binom(k + m - l, k))))


@lru_cache(maxsize=8)
def zeta_table(n_max):
    """Read-only 4-D array ``Z[n, k, m, l]``, zero outside k <= n, l <= m."""
    r = np.arange(n_max + 1)
    n = r[:, None, None, None]
    k = r[None, :, None, None]
    m = r[None, None, :, None]
    l = r[None, None, None, :]
    valid = (k <= n) & (l <= m)
    kk = np.where(valid, k, 0)
    ll = np.where(valid, l, 0)
    log_val = 0.5 * (log_binom(n - kk + ll, ll) + log_binom(kk + m - ll, kk))
    table = np.where(valid, np.exp(log_val), 0.0)
    table.flags.writeable = False
    return table


def _validate_pair(idx1, idx2):
    idx1 = IndexTuple(*(_check_int(f, v) for f, v in zip(IndexTuple._fields, idx1)))
    idx2 = IndexTuple(*(_check_int(f, v) for f, v in zip(IndexTuple._fields, idx2)))
    if idx1.k > idx1.n or idx1.l > idx1.m:
        raise DomainError(f"invalid index tuple {tuple(idx1)}")
    # the shifted partner index may overhang l by one (l2 = m2 + 1); only
    # the j-shifted terms inside the sum are required to be in range
    if idx2.k > idx2.n or idx2.l > idx2.m + 1:
        raise DomainError(f"invalid index tuple {tuple(idx2)}")
    return idx1, idx2


def _j_term(idx1, n2, k2, m2, l2, T):
    n1, k1, m1, l1 = idx1
    return (
        bs_coeff(T, n1, k1) * bs_coeff(T, n2, k2)
        * bs_coeff(T, m1, l1) * bs_coeff(T, m2, l2)
        * zeta_coeff(n1, k1, m1, l1) * zeta_coeff(n2, k2, m2, l2)
    )


def _tap_pair(idx1, idx2, T1, s):
    b1 = idx1.n - idx1.k + idx1.l
    b2 = idx2.n - idx2.k + idx2.l
    if s > b1 or s > b2:
        return 0.0
    return bs_coeff(T1, b1, s) * bs_coeff(T1, b2, s)


def j_plus(idx1, idx2, T, T1, s=1):
    """Interference sum over non-negative shifts j of the second index tuple."""
    idx1, idx2 = _validate_pair(idx1, idx2)
    s = _check_int("s", s)
    _check_transmittance(T1)
    tap = _tap_pair(idx1, idx2, T1, s)
    if tap == 0.0:
        return 0.0
    n2, k2, m2, l2 = idx2
    total = 0.0
    for j in range(0, min(n2 - k2, m2 - l2) + 1):
        total += (-1) ** j * _j_term(idx1, n2, k2 + j, m2, l2 + j, T)
    return total * tap


def j_minus(idx1, idx2, T, T1, s=1):
    """Interference sum over negative shifts j = 1..min(k2, l2)."""
    idx1, idx2 = _validate_pair(idx1, idx2)
    s = _check_int("s", s)
    _check_transmittance(T1)
    tap = _tap_pair(idx1, idx2, T1, s)
    if tap == 0.0:
        return 0.0
    n2, k2, m2, l2 = idx2
    total = 0.0
    for j in range(1, min(k2, l2) + 1):
        total += (-1) ** j * _j_term(idx1, n2, k2 - j, m2, l2 - j, T)
    return total * tap


def click_weights(mode, size, det_eff=1.0, placement="none"):
    """Post-selection weight of each tapped photon number s = 0..size-1.

    An ideal counter keeps exactly ``mode.photons`` photons and an ideal
    threshold detector keeps every s >= 1.  When the detector efficiency
    acts on the tap, each tapped photon is registered independently with
    probability ``det_eff``.  ``mode.variant == "none"`` keeps everything.
    """
    s = np.arange(size)
    eta = det_eff if placement == "subtraction_tap" else 1.0
    if mode.variant == "none":
        return np.ones(size)
    if mode.variant == "counter":
        s0 = mode.photons
        if eta == 1.0:
            return (s == s0).astype(float)
        ss = np.where(s >= s0, s, s0)
        log_w = log_binom(ss, s0) + s0 * np.log(eta) + xlogy(ss - s0, 1.0 - eta)
        return np.where(s >= s0, np.exp(log_w), 0.0)
    # threshold detector
    return 1.0 - (1.0 - eta) ** s


def tap_factors(T1, weights):
    """Per-B1-photon-number factors from the subtraction tap.

    Returns ``(h_norm, h_num, h_raise)`` indexed by the photon number b in
    B1 before the tap:

    * ``h_norm[b]  = sum_s w_s (gamma^T1_{b,s})^2``
    * ``h_num[b]   = sum_s w_s (gamma^T1_{b,s})^2 (b - s)``
    * ``h_raise[b] = sum_s w_s gamma^T1_{b,s} gamma^T1_{b+1,s} sqrt(b + 1 - s)``

    The last entry of ``h_raise`` pairs with b+1 beyond the table and is 0.
    """
    size = len(weights)
    g1 = bs_table(T1, size)
    b = np.arange(size)[:, None]
    s = np.arange(size)[None, :]
    w = np.asarray(weights)[None, :]
    h_norm = np.sum(w * g1**2, axis=1)
    h_num = np.sum(w * g1**2 * np.clip(b - s, 0, None), axis=1)
    h_raise = np.zeros(size)
    root = np.sqrt(np.clip(b[:-1] + 1 - s, 0, None))
    h_raise[:-1] = np.sum(w * g1[:-1] * g1[1:] * root, axis=1)
    return h_norm, h_num, h_raise


@lru_cache(maxsize=256)
def amplitude_kernel(T, n_max):
    """Signed diagonal sums of the channel expansion.

    ``K[n, m, d + n_max] = sum_k (-1)^k gamma^T_{n,k} gamma^T_{m,k+d} zeta_{n,k,m,k+d}``

    is the amplitude (without the TMSV weights) of the output with
    ``n + d`` photons in B1 and ``m - d`` in E.  Summing the J+/J- terms over
    (k, l) at fixed d is exactly ``K[n, m, d] * K[n', m', d']`` for the
    partner tuple, which is how the covariance sums are evaluated.

    The array is padded with one extra zero row in n and m and one extra
    zero column in d so partner indices n+1, m+1, d+1 never go out of range.
    Depends on T and the cutoff only, so it is cached and shared between
    every modulation, noise level and subtraction variant.
    """
    _check_transmittance(T)
    N = int(n_max)
    G = bs_table(T, N + 1)
    c4 = G[:, :, None, None] * G[None, None, :, :] * zeta_table(N)
    r = np.arange(N + 1)
    k = r[None, :, None, None]
    l = r[None, None, None, :]
    sign = np.where(r % 2 == 0, 1.0, -1.0)[None, :, None, None]
    d = np.broadcast_to(l - k + N, c4.shape)
    n_idx = np.broadcast_to(r[:, None, None, None], c4.shape)
    m_idx = np.broadcast_to(r[None, None, :, None], c4.shape)
    flat = (n_idx * (N + 2) + m_idx) * (2 * N + 2) + d
    kernel = np.bincount(
        flat.ravel(), weights=(sign * c4).ravel(), minlength=(N + 1) * (N + 2) * (2 * N + 2)
    ).reshape(N + 1, N + 2, 2 * N + 2)
    padded = np.zeros((N + 2, N + 2, 2 * N + 2))
    padded[: N + 1] = kernel
    padded.flags.writeable = False
    return padded


def subtraction_probability(params: ProtocolParams, mode: SubtractionMode):
    """Probability that the tap detector produces the outcome ``mode`` asks for.

    Counter(s): probability of registering exactly s photons; detector:
    probability of a click.  Sums run to the configured cutoff.
    """
    if mode.variant == "none":
        raise DomainError("no post-selection happens without photon subtraction")
    N = params.n_max
    K = amplitude_kernel(params.channel_T, N)[: N + 1, : N + 1, : 2 * N + 1]
    a2 = tmsv_amplitudes(params.alpha_sq, N) ** 2
    b2 = tmsv_amplitudes(params.beta_sq, N) ** 2
    w = click_weights(mode, 2 * N + 2, params.det_eff, params.det_eff_placement)
    h_norm, _, _ = tap_factors(params.tap_T1, w)
    n = np.arange(N + 1)[:, None, None]
    d = np.arange(-N, N + 1)[None, None, :]
    b = n + d
    h = np.where(b >= 0, h_norm[np.clip(b, 0, None)], 0.0)
    return float(np.einsum("n,m,nmd->", a2, b2, h * K**2))
