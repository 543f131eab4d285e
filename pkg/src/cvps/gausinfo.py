"""Gaussian information measures on quadrature covariance matrices.

Matrices are ordered (q1, p1, q2, p2, ...) with vacuum variance 1.  Every
function accepts either a plain array or an object carrying ``entries`` and
``mode_order`` (a ``CovarianceMatrix``).
"""

from __future__ import annotations

import numpy as np

from .errors import DomainError, UnphysicalError

G_CLAMP = 1e-6
PAIR_TOL = 1e-9


def omega(n_modes):
    """Symplectic form, a direct sum of [[0, 1], [-1, 0]]."""
    return np.kron(np.eye(n_modes), np.array([[0.0, 1.0], [-1.0, 0.0]]))


def _entries(gamma):
    g = np.asarray(getattr(gamma, "entries", gamma), dtype=float)
    if g.ndim != 2 or g.shape[0] != g.shape[1] or g.shape[0] % 2:
        raise DomainError(f"covariance matrix must be square of even size, got {g.shape}")
    if not np.allclose(g, g.T, rtol=0, atol=1e-12 * max(1.0, np.abs(g).max())):
        raise DomainError("covariance matrix is not symmetric")
    return g


def symplectic_eigenvalues(gamma):
    """Symplectic spectrum of ``gamma``, one value per mode, sorted descending.

    The eigenvalues of i*Omega*gamma come in +/- pairs; the moduli are sorted
    and each consecutive pair is collapsed to its mean.
    """
    g = _entries(gamma)
    n = g.shape[0] // 2
    if n == 0:
        return np.zeros(0)
    ev = np.abs(np.linalg.eigvals(1j * omega(n) @ g))
    ev = np.sort(ev)[::-1]
    pairs = ev.reshape(n, 2)
    scale = max(1.0, pairs.max())
    if np.any(np.abs(pairs[:, 0] - pairs[:, 1]) > 1e3 * PAIR_TOL * scale):
        raise DomainError("eigenvalues of i*Omega*gamma do not pair up")
    return pairs.mean(axis=1)


def g_function(x):
    """Entropy in bits of a thermal mode with symplectic eigenvalue ``x``."""
    x = float(x)
    if x < 1.0 - G_CLAMP:
        raise UnphysicalError(f"symplectic eigenvalue {x!r} is below 1", x)
    if x <= 1.0:
        return 0.0
    hi, lo = (x + 1) / 2, (x - 1) / 2
    return hi * np.log2(hi) - lo * np.log2(lo)


def entropy(gamma):
    """Von Neumann entropy (bits) of the Gaussian state with covariance ``gamma``."""
    return float(sum(g_function(v) for v in symplectic_eigenvalues(gamma)))


def _mode_index(gamma, mode):
    if isinstance(mode, str):
        order = getattr(gamma, "mode_order", None)
        if order is None or mode not in order:
            raise DomainError(f"mode {mode!r} not present")
        return list(order).index(mode)
    return int(mode)


def condition_on_homodyne(gamma, measured_mode, quadrature="q"):
    """Covariance of the remaining modes after homodyning one mode.

    ``rest - L (Pi g_m Pi)^MP L^T`` with the pseudoinverse written out:
    ``(Pi g_m Pi)^MP = Pi / g_m[qq]`` (or ``[pp]``).
    """
    g = _entries(gamma)
    n = g.shape[0] // 2
    idx = _mode_index(gamma, measured_mode)
    if not 0 <= idx < n:
        raise DomainError(f"mode index {idx} outside 0..{n - 1}")
    if quadrature not in ("q", "p"):
        raise DomainError("quadrature must be 'q' or 'p'")
    meas = [2 * idx, 2 * idx + 1]
    rest = [i for i in range(2 * n) if i not in meas]
    gm = g[np.ix_(meas, meas)]
    L = g[np.ix_(rest, meas)]
    which = 0 if quadrature == "q" else 1
    var = gm[which, which]
    if not var > 0:
        raise DomainError(f"measured quadrature variance {var!r} is not positive")
    proj = np.zeros((2, 2))
    proj[which, which] = 1.0 / var
    out = g[np.ix_(rest, rest)] - L @ proj @ L.T
    out = 0.5 * (out + out.T)
    order = getattr(gamma, "mode_order", None)
    if order is None:
        return out
    kept = tuple(m for i, m in enumerate(order) if i != idx)
    return type(gamma)(out, kept)


def mutual_information(e):
    """Alice-Bob mutual information in bits from homodyne statistics."""
    v_cond = e.V_B2 - e.C_AB2**2 / e.V_A
    if not v_cond > 0:
        raise UnphysicalError(f"conditional variance {v_cond!r} is not positive", v_cond)
    return 0.5 * np.log2(e.V_B2 / v_cond)


def holevo_information(gamma_efb2, quadrature="q"):
    """Eve's Holevo information on Bob's homodyne outcome.

    ``gamma_efb2`` is ordered (E, F, B2); B2 is the measured mode.
    """
    g = _entries(gamma_efb2)
    if g.shape != (6, 6):
        raise DomainError("expected the 6x6 (E, F, B2) covariance matrix")
    s_ef = entropy(g[:4, :4])
    s_cond = entropy(condition_on_homodyne(g, 2, quadrature))
    return s_ef - s_cond


def holevo_from_purification(gamma_ab2, quadrature="q"):
    """Holevo information of an eavesdropper holding the purification of
    (A, B2), with B2 homodyned: S(AB2) - S(A | B2)."""
    g = _entries(gamma_ab2)
    if g.shape != (4, 4):
        raise DomainError("expected the 4x4 (A, B2) covariance matrix")
    return entropy(g) - entropy(condition_on_homodyne(g, 1, quadrature))
