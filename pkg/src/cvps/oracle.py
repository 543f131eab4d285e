"""Brute-force Fock-space simulation of the five-mode setup.

Modes are (A, B, E, F, C): Alice's reference, Bob's signal, Eve's channel
output, Eve's idler and the subtraction tap.  Both inputs are two-mode
squeezed vacua cut at ``n_max`` photons per mode; the three output modes of
the beam splitters can then hold up to ``2 * n_max`` photons, so the
simulation is exact for the truncated input.  The input is *not*
renormalised, so probabilities agree term by term with the closed forms.

Beam splitters are built as ``expm(theta (x^dag y - y^dag x))`` inside each
fixed-photon-number block, independently of the binomial expansion used
by the closed forms.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.linalg import expm

from .covariance import CovarianceElements, CovarianceMatrix
from .errors import DomainError, PostSelectionError
from .params import ProtocolParams

MODES = ("A", "B2", "E", "F", "C")
EIG_CUTOFF = 1e-14


@dataclass
class FockState:
    """Amplitude tensor with one axis per mode (not necessarily normalised)."""

    amplitudes: np.ndarray
    mode_labels: tuple

    def __post_init__(self):
        self.mode_labels = tuple(self.mode_labels)
        if self.amplitudes.ndim != len(self.mode_labels):
            raise DomainError("one tensor axis per mode label is required")

    def norm_sq(self):
        return float(np.vdot(self.amplitudes, self.amplitudes).real)

    def normalized(self):
        return FockState(self.amplitudes / np.sqrt(self.norm_sq()), self.mode_labels)

    def axis(self, mode):
        try:
            return self.mode_labels.index(mode)
        except ValueError:
            raise DomainError(f"mode {mode!r} not in {self.mode_labels}") from None


@dataclass
class Mixture:
    """Orthogonal branches ``(weight, normalised FockState)``; weights sum to 1."""

    branches: list

    @property
    def mode_labels(self):
        return self.branches[0][1].mode_labels


@dataclass
class DensityMatrix:
    matrix: np.ndarray
    modes: tuple
    dims: tuple

    def __post_init__(self):
        m = self.matrix
        if not np.allclose(m, m.conj().T, atol=1e-12):
            raise DomainError("density matrix is not Hermitian")


def _thermal_amplitudes(mu, n_max):
    n = np.arange(n_max + 1)
    return np.sqrt(mu**n / (1.0 + mu) ** (n + 1))


@lru_cache(maxsize=32)
def beam_splitter(T, dim):
    """Unitary on two modes of dimension ``dim`` (index a * dim + b).

    Maps x^dag -> sqrt(T) x^dag - sqrt(1-T) y^dag and
    y^dag -> sqrt(T) y^dag + sqrt(1-T) x^dag.  Blocks whose total photon
    number does not fit in the box are left as identity; inputs never
    populate them.
    """
    theta = np.arccos(np.sqrt(T))
    U = np.eye(dim * dim)
    for total in range(dim):
        a = np.arange(total + 1)
        # x^dag y |a, t-a> = sqrt(a+1) sqrt(t-a) |a+1, t-a-1>
        gen = np.zeros((total + 1, total + 1))
        hop = np.sqrt(a[:-1] + 1) * np.sqrt(total - a[:-1])
        gen[a[1:], a[:-1]] = hop
        gen = theta * (gen - gen.T)
        idx = a * dim + (total - a)
        U[np.ix_(idx, idx)] = expm(gen)
    U.flags.writeable = False
    return U


def apply_beam_splitter(state: FockState, mode_x, mode_y, T):
    ax, ay = state.axis(mode_x), state.axis(mode_y)
    psi = state.amplitudes
    dim = psi.shape[ax]
    if psi.shape[ay] != dim:
        raise DomainError("beam splitter needs equal mode dimensions")
    moved = np.moveaxis(psi, (ax, ay), (-2, -1))
    shape = moved.shape
    out = moved.reshape(-1, dim * dim) @ beam_splitter(float(T), dim).T
    out = np.moveaxis(out.reshape(shape), (-2, -1), (ax, ay))
    return FockState(out, state.mode_labels)


def build_joint_state(params: ProtocolParams, n_max=None, tap=True) -> FockState:
    """Unnormalised (A, B2, E, F, C) state after channel and tap.

    With ``tap=False`` the subtraction stage is omitted and the state lives
    on (A, B2, E, F) only, which is all the conventional protocol needs.
    """
    N = params.n_max if n_max is None else int(n_max)
    D = 2 * N + 1
    a = _thermal_amplitudes(params.alpha_sq, N)
    b = _thermal_amplitudes(params.beta_sq, N)
    n = np.arange(N + 1)
    if tap:
        psi = np.zeros((N + 1, D, D, N + 1, D), dtype=complex)
        psi[n[:, None], n[:, None], n[None, :], n[None, :], 0] = a[:, None] * b[None, :]
        state = FockState(psi, MODES)
    else:
        psi = np.zeros((N + 1, D, D, N + 1), dtype=complex)
        psi[n[:, None], n[:, None], n[None, :], n[None, :]] = a[:, None] * b[None, :]
        state = FockState(psi, MODES[:4])
    state = apply_beam_splitter(state, "B2", "E", params.channel_T)
    if tap:
        state = apply_beam_splitter(state, "B2", "C", params.tap_T1)
    return state


def postselect(state: FockState, mode_name="C", outcome=1, efficiency=1.0):
    """Condition on the tap detector.

    ``outcome`` is an integer s (photon counter registering exactly s) or
    ``"threshold"`` (click on any s >= 1).  Each photon is registered with
    probability ``efficiency``.  Returns ``(state_or_mixture, probability)``
    where the probability is relative to the (unnormalised) input norm.
    """
    ax = state.axis(mode_name)
    psi = state.amplitudes
    kept = tuple(m for m in state.mode_labels if m != mode_name)
    dim = psi.shape[ax]
    s = np.arange(dim)
    if outcome == "threshold":
        weights = 1.0 - (1.0 - efficiency) ** s
    elif isinstance(outcome, (int, np.integer)) and outcome >= 0:
        if efficiency == 1.0:
            weights = (s == outcome).astype(float)
        else:
            from scipy.stats import binom

            weights = binom.pmf(outcome, s, efficiency)
    else:
        raise DomainError(f"unknown outcome {outcome!r}")

    branches = []
    for j in range(dim):
        if weights[j] == 0.0:
            continue
        piece = np.take(psi, j, axis=ax)
        p = float(np.vdot(piece, piece).real) * weights[j]
        if p > 0:
            branches.append((p, piece))
    prob = sum(p for p, _ in branches)
    if not prob > 0:
        raise PostSelectionError(f"outcome {outcome!r} on mode {mode_name} has probability 0")
    if len(branches) == 1:
        p, piece = branches[0]
        return FockState(piece, kept).normalized(), prob
    mix = [
        (p / prob, FockState(piece, kept).normalized()) for p, piece in branches
    ]
    return Mixture(mix), prob


def _branches(obj):
    if isinstance(obj, Mixture):
        return obj.branches
    if isinstance(obj, FockState):
        return [(1.0, obj.normalized())]
    if isinstance(obj, DensityMatrix):
        vals, vecs = np.linalg.eigh(obj.matrix)
        out = []
        for lam, v in zip(vals, vecs.T):
            if lam > EIG_CUTOFF:
                out.append((lam, FockState(v.reshape(obj.dims), obj.modes)))
        return out
    raise TypeError(f"cannot interpret {type(obj).__name__} as a state")


def reduce(obj, keep_modes) -> DensityMatrix:
    """Partial trace onto ``keep_modes`` (in the order given)."""
    keep_modes = tuple(keep_modes)
    rho = None
    dims = None
    for w, st in _branches(obj):
        keep = [st.axis(m) for m in keep_modes]
        rest = [i for i in range(st.amplitudes.ndim) if i not in keep]
        t = np.transpose(st.amplitudes, keep + rest)
        dims = t.shape[: len(keep)]
        mat = t.reshape(int(np.prod(dims)), -1)
        part = w * (mat @ mat.conj().T)
        rho = part if rho is None else rho + part
    rho = rho / np.trace(rho).real
    rho = 0.5 * (rho + rho.conj().T)
    return DensityMatrix(rho, keep_modes, tuple(dims))


def _lower(psi, axis):
    """Apply the annihilation operator along ``axis``."""
    n = psi.shape[axis]
    out = np.zeros_like(psi)
    src = [slice(None)] * psi.ndim
    dst = [slice(None)] * psi.ndim
    src[axis] = slice(1, n)
    dst[axis] = slice(0, n - 1)
    shape = [1] * psi.ndim
    shape[axis] = n - 1
    out[tuple(dst)] = psi[tuple(src)] * np.sqrt(np.arange(1, n)).reshape(shape)
    return out


def _moments(st: FockState, modes):
    psi = st.amplitudes
    axes = [st.axis(m) for m in modes]
    low = [_lower(psi, ax) for ax in axes]
    M = len(modes)
    first = np.array([np.vdot(psi, L) for L in low])
    Nm = np.empty((M, M), dtype=complex)
    Mm = np.empty((M, M), dtype=complex)
    for i in range(M):
        for j in range(M):
            Mm[i, j] = np.vdot(low[i], low[j])
            Nm[i, j] = np.vdot(psi, _lower(low[j], axes[i]))
    return first, Nm, Mm


def covariance_from_state(obj, modes=("A", "B2", "E", "F")) -> CovarianceMatrix:
    """Quadrature covariance with q = a^dag + a, p = i(a^dag - a)."""
    modes = tuple(modes)
    M = len(modes)
    first = np.zeros(M, dtype=complex)
    Nm = np.zeros((M, M), dtype=complex)
    Mm = np.zeros((M, M), dtype=complex)
    for w, st in _branches(obj):
        f, n_, m_ = _moments(st, modes)
        first += w * f
        Nm += w * n_
        Mm += w * m_
    # xi = (a_1..a_M, a_1^dag..a_M^dag); S[u, v] = <xi_u xi_v>
    eye = np.eye(M)
    S = np.block([[Nm, Mm.T + eye], [Mm, Nm.conj()]])
    mean_xi = np.concatenate([first, first.conj()])
    R = np.zeros((2 * M, 2 * M), dtype=complex)
    for i in range(M):
        R[2 * i, i], R[2 * i, M + i] = 1.0, 1.0
        R[2 * i + 1, i], R[2 * i + 1, M + i] = -1j, 1j
    second = R @ S @ R.T
    mean_x = R @ mean_xi
    gamma = 0.5 * (second + second.T) - np.outer(mean_x, mean_x)
    return CovarianceMatrix(gamma.real, modes)


def elements_from_state(obj) -> CovarianceElements:
    """The eight covariance elements read off the q-quadrature entries."""
    g = covariance_from_state(obj, ("A", "B2", "E", "F")).entries
    q = {"A": 0, "B2": 2, "E": 4, "F": 6}
    return CovarianceElements(
        V_A=g[q["A"], q["A"]],
        V_B2=g[q["B2"], q["B2"]],
        V_E=g[q["E"], q["E"]],
        V_F=g[q["F"], q["F"]],
        C_AB2=g[q["A"], q["B2"]],
        C_EF=g[q["E"], q["F"]],
        C_EB2=g[q["E"], q["B2"]],
        C_FB2=g[q["F"], q["B2"]],
    )


def entropy_exact(rho: DensityMatrix):
    """Von Neumann entropy in bits."""
    m = rho.matrix if isinstance(rho, DensityMatrix) else np.asarray(rho)
    if not np.allclose(m, m.conj().T, atol=1e-12):
        raise DomainError("density matrix is not Hermitian")
    lam = np.linalg.eigvalsh(m)
    lam = lam[lam > EIG_CUTOFF]
    return float(-np.sum(lam * np.log2(lam)))


def quadrature_wavefunctions(dim, x):
    """<x|n> for q = a + a^dag (vacuum variance 1), n = 0..dim-1.

    Returns an array of shape (dim, len(x)).
    """
    X = np.asarray(x, dtype=float) / np.sqrt(2.0)
    out = np.zeros((dim, X.size))
    out[0] = np.pi ** -0.25 * np.exp(-0.5 * X**2)
    if dim > 1:
        out[1] = np.sqrt(2.0) * X * out[0]
    for n in range(1, dim - 1):
        out[n + 1] = np.sqrt(2.0 / (n + 1)) * X * out[n] - np.sqrt(n / (n + 1)) * out[n - 1]
    return out * 2.0**-0.25


def holevo_exact(obj, measured="B2", eve=("E", "F"), grid_half_width=12.0, points=481):
    """Exact Holevo information between a homodyne (q) record on ``measured``
    and the joint modes ``eve``, by quadrature over the outcome."""
    branches = _branches(obj)
    s_eve = entropy_exact(reduce(obj, eve))
    x = np.linspace(-grid_half_width, grid_half_width, points)
    dx = x[1] - x[0]
    labels = branches[0][1].mode_labels
    others = [m for m in labels if m != measured]
    dim = branches[0][1].amplitudes.shape[branches[0][1].axis(measured)]
    wf = quadrature_wavefunctions(dim, x)

    # conditional states: amplitude tensors over the other modes per x
    cond = []
    for w, st in branches:
        ax = st.axis(measured)
        t = np.moveaxis(st.amplitudes, ax, -1)
        cond.append((w, np.tensordot(t, wf, axes=([t.ndim - 1], [0]))))  # (..., x)

    pure = len(branches) == 1
    eve_axes = [others.index(m) for m in eve]
    rest_axes = [i for i in range(len(others)) if i not in eve_axes]
    total_p = 0.0
    total_ps = 0.0
    for ix in range(x.size):
        rho = None
        p_x = 0.0
        for w, c in cond:
            v = c[..., ix]
            p_x += w * float(np.vdot(v, v).real)
            if pure:
                # pure conditional state: S(eve|x) = S(rest|x)
                mat = np.transpose(v, rest_axes + eve_axes).reshape(
                    int(np.prod([v.shape[i] for i in rest_axes])), -1
                )
            else:
                mat = np.transpose(v, eve_axes + rest_axes).reshape(
                    int(np.prod([v.shape[i] for i in eve_axes])), -1
                )
            part = w * (mat @ mat.conj().T)
            rho = part if rho is None else rho + part
        if p_x < 1e-300:
            continue
        rho = rho / p_x
        total_p += p_x * dx
        total_ps += p_x * dx * entropy_exact(0.5 * (rho + rho.conj().T))
    return s_eve - total_ps / total_p
