"""Closed-form covariance elements of the post-selected state.

Mode order for the block matrices is (E, F, B2) for Eve's view and
(A, B2) for the legitimate parties.  Every state in the model is
phase symmetric, so each 2x2 block is either ``x * I2`` or ``x * Z``
with ``Z = diag(1, -1)``.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass

import numpy as np

from . import gausinfo
from .coeffs import amplitude_kernel, click_weights, tap_factors, tmsv_amplitudes
from .errors import DomainError, PostSelectionError, UnphysicalError
from .params import ProtocolParams, SubtractionMode

I2 = np.eye(2)
SIGMA_Z = np.diag([1.0, -1.0])

VARIANCE_FLOOR = 1e-6
PHYSICAL_TOL = 1e-8


@dataclass(frozen=True)
class CovarianceElements:
    V_A: float
    V_B2: float
    V_E: float
    V_F: float
    C_AB2: float
    C_EF: float
    C_EB2: float
    C_FB2: float

    def as_dict(self):
        return dataclasses.asdict(self)

    def check(self, tol=1e-9):
        """Raise UnphysicalError unless variances clear the vacuum floor and
        every correlation obeys Cauchy-Schwarz."""
        for name in ("V_A", "V_B2", "V_E", "V_F"):
            v = getattr(self, name)
            if v < 1.0 - tol:
                raise UnphysicalError(f"{name} = {v!r} is below the vacuum level", v)
        for name in ("C_AB2", "C_EF", "C_EB2", "C_FB2"):
            x, y = name[2], name[3:]
            bound = np.sqrt(getattr(self, "V_" + x) * getattr(self, "V_" + y))
            c = getattr(self, name)
            if abs(c) > bound + tol:
                raise UnphysicalError(f"|{name}| = {abs(c)!r} exceeds {bound!r}", c)
        return self


@dataclass(frozen=True)
class CovarianceMatrix:
    entries: np.ndarray
    mode_order: tuple

    def __post_init__(self):
        entries = np.asarray(self.entries, dtype=float)
        if entries.shape != (2 * len(self.mode_order),) * 2:
            raise DomainError(
                f"matrix of shape {entries.shape} does not fit modes {self.mode_order}"
            )
        object.__setattr__(self, "entries", entries)
        object.__setattr__(self, "mode_order", tuple(self.mode_order))

    def block(self, *modes):
        idx = [2 * self.mode_order.index(m) + q for m in modes for q in (0, 1)]
        return CovarianceMatrix(self.entries[np.ix_(idx, idx)], modes)

    def symplectic_eigenvalues(self):
        return gausinfo.symplectic_eigenvalues(self.entries)

    def check_physical(self, tol=PHYSICAL_TOL):
        if not np.allclose(self.entries, self.entries.T, atol=1e-12, rtol=0):
            raise UnphysicalError("covariance matrix is not symmetric")
        nu = self.symplectic_eigenvalues()
        if nu.size and nu.min() < 1.0 - tol:
            raise UnphysicalError(
                f"symplectic eigenvalue {nu.min()!r} violates the uncertainty principle",
                float(nu.min()),
            )
        return self


def _moment_sums(params, mode):
    """Unnormalised post-selected moments; returns (P, dict of sums)."""
    N = params.n_max
    K = amplitude_kernel(params.channel_T, N)
    w = click_weights(mode, 2 * N + 2, params.det_eff, params.det_eff_placement)
    h_norm, h_num, h_raise = tap_factors(params.tap_T1, w)

    alpha = np.zeros(N + 2)
    beta = np.zeros(N + 2)
    alpha[: N + 1] = tmsv_amplitudes(params.alpha_sq, N)
    beta[: N + 1] = tmsv_amplitudes(params.beta_sq, N)
    a2, b2 = alpha[: N + 1] ** 2, beta[: N + 1] ** 2
    a_up = alpha[: N + 1] * alpha[1:]
    b_up = beta[: N + 1] * beta[1:]

    n = np.arange(N + 1)[:, None, None]
    m = np.arange(N + 1)[None, :, None]
    d = np.arange(-N, N + 1)[None, None, :]
    b = n + d  # photons in B1 before the tap
    e = m - d  # photons in E
    live = (b >= 0) & (e >= 0)
    bi = np.clip(b, 0, 2 * N + 1)

    def h(table):
        return np.where(live, table[bi], 0.0)

    D = slice(0, 2 * N + 1)
    D_up = slice(1, 2 * N + 2)
    K0 = K[: N + 1, : N + 1, D]
    diag = K0 * K0
    cross_a = K0 * K[1 : N + 2, : N + 1, D]      # partner (n+1, m, d)
    cross_ef = K0 * K[: N + 1, 1 : N + 2, D]     # partner (n, m+1, d)
    cross_eb = K0 * K[: N + 1, : N + 1, D_up]    # partner (n, m, d+1)
    cross_fb = K0 * K[: N + 1, 1 : N + 2, D_up]  # partner (n, m+1, d+1)

    ee = np.clip(e, 0, None)
    hn, hr = h(h_norm), h(h_raise)
    sums = {
        "V_A": np.einsum("n,m,nmd->", a2, b2, n * hn * diag),
        "V_B2": np.einsum("n,m,nmd->", a2, b2, h(h_num) * diag),
        "V_E": np.einsum("n,m,nmd->", a2, b2, ee * hn * diag),
        "V_F": np.einsum("n,m,nmd->", a2, b2, m * hn * diag),
        "C_AB2": np.einsum("n,m,nmd->", a_up, b2, np.sqrt(n + 1) * hr * cross_a),
        "C_EF": np.einsum(
            "n,m,nmd->", a2, b_up, np.sqrt(m + 1) * np.sqrt(ee + 1) * hn * cross_ef
        ),
        "C_EB2": np.einsum("n,m,nmd->", a2, b2, np.sqrt(ee) * hr * cross_eb),
        "C_FB2": np.einsum("n,m,nmd->", a2, b_up, np.sqrt(m + 1) * hr * cross_fb),
    }
    P = float(np.einsum("n,m,nmd->", a2, b2, hn * diag))
    return P, sums


def _homodyne_loss(e: CovarianceElements, eta):
    r = np.sqrt(eta)
    return dataclasses.replace(
        e,
        V_B2=eta * e.V_B2 + 1.0 - eta,
        C_AB2=r * e.C_AB2,
        C_EB2=r * e.C_EB2,
        C_FB2=r * e.C_FB2,
    )


def elements_with_probability(params: ProtocolParams, mode: SubtractionMode):
    """Return ``(P, CovarianceElements)`` for a subtraction variant."""
    if mode.variant == "none":
        raise DomainError("use baseline_elements for the protocol without subtraction")
    P, sums = _moment_sums(params, mode)
    if not P > 0:
        raise PostSelectionError(f"post-selection probability is {P!r} for {mode.label}")
    values = {}
    for name, total in sums.items():
        values[name] = (1.0 if name.startswith("V") else 0.0) + 2.0 * total / P
    for name in ("V_A", "V_B2", "V_E", "V_F"):
        if values[name] < 1.0 - VARIANCE_FLOOR:
            raise UnphysicalError(
                f"{name} = {values[name]!r} fell below the vacuum level", values[name]
            )
    out = CovarianceElements(**values)
    if params.det_eff_placement == "homodyne":
        out = _homodyne_loss(out, params.det_eff)
    return P, out


def elements(params: ProtocolParams, mode: SubtractionMode) -> CovarianceElements:
    """Covariance elements of the state kept after photon subtraction."""
    return elements_with_probability(params, mode)[1]


def baseline_elements(params: ProtocolParams) -> CovarianceElements:
    """Thermal-loss covariance of the protocol without photon subtraction.

    The tap is absent; the homodyne efficiency is applied only when it is
    placed on the homodyne detector.
    """
    a, b, T = params.alpha_sq, params.beta_sq, params.channel_T
    va, vf = 2 * a + 1, 2 * b + 1
    ca = 2 * np.sqrt(a * (a + 1))
    cb = 2 * np.sqrt(b * (b + 1))
    out = CovarianceElements(
        V_A=va,
        V_B2=T * va + (1 - T) * vf,
        V_E=(1 - T) * va + T * vf,
        V_F=vf,
        C_AB2=np.sqrt(T) * ca,
        C_EF=np.sqrt(T) * cb,
        C_EB2=2 * np.sqrt(T * (1 - T)) * (b - a),
        C_FB2=np.sqrt(1 - T) * cb,
    )
    if params.det_eff_placement == "homodyne":
        out = _homodyne_loss(out, params.det_eff)
    return out


def assemble_gamma_efb2(e: CovarianceElements, check=True) -> CovarianceMatrix:
    """6x6 covariance of (E, F, B2)."""
    g = np.block(
        [
            [e.V_E * I2, e.C_EF * SIGMA_Z, e.C_EB2 * I2],
            [e.C_EF * SIGMA_Z, e.V_F * I2, e.C_FB2 * SIGMA_Z],
            [e.C_EB2 * I2, e.C_FB2 * SIGMA_Z, e.V_B2 * I2],
        ]
    )
    cm = CovarianceMatrix(g, ("E", "F", "B2"))
    return cm.check_physical() if check else cm


def assemble_gamma_ab2(e: CovarianceElements, check=True) -> CovarianceMatrix:
    """4x4 covariance of (A, B2)."""
    g = np.block(
        [
            [e.V_A * I2, e.C_AB2 * SIGMA_Z],
            [e.C_AB2 * SIGMA_Z, e.V_B2 * I2],
        ]
    )
    cm = CovarianceMatrix(g, ("A", "B2"))
    return cm.check_physical() if check else cm
