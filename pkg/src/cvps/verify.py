"""Cross-checks of the closed-form sums against the Fock-space oracle."""

from __future__ import annotations

import dataclasses
import warnings

import numpy as np

from . import gausinfo, oracle
from .covariance import assemble_gamma_efb2, baseline_elements, elements_with_probability
from .params import ProtocolParams, SubtractionMode, TruncationConfig, TruncationWarning

ELEMENT_NAMES = ("V_A", "V_B2", "V_E", "V_F", "C_AB2", "C_EF", "C_EB2", "C_FB2")
REL_TOL = 1e-9
ABS_FLOOR = 1e-13
DOMINANCE_SLACK = -1e-9

# (alpha_sq, beta_sq, channel_T), tap transmittance 0.9
ORACLE_POINTS = ((0.2, 0.0, 0.3), (0.5, 0.001, 0.5), (1.0, 0.01, 0.9))
ORACLE_MODES = (
    (SubtractionMode.counter(1), 1),
    (SubtractionMode.counter(2), 2),
    (SubtractionMode.detector(), "threshold"),
)


def rel_error(value, reference):
    """|value - reference| relative to the larger magnitude.  Two values that
    are both below ABS_FLOOR (e.g. a correlation that vanishes exactly on
    one side and to rounding on the other) count as agreeing."""
    scale = max(abs(value), abs(reference))
    if scale <= ABS_FLOOR:
        return 0.0
    return abs(value - reference) / scale


def _params(alpha_sq, beta_sq, T, n_max, tap_T1=0.9, det_eff=1.0, placement="none"):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", TruncationWarning)
        return ProtocolParams(
            alpha_sq=alpha_sq,
            beta_sq=beta_sq,
            channel_T=T,
            tap_T1=tap_T1,
            det_eff=det_eff,
            det_eff_placement=placement,
            trunc=TruncationConfig(n_max),
        )


def compare_with_oracle(params, mode, outcome, state=None, closed_params=None):
    """Relative errors of P and the eight elements; returns a dict."""
    if state is None:
        state = oracle.build_joint_state(params)
    eff = params.det_eff if params.det_eff_placement == "subtraction_tap" else 1.0
    post, p_oracle = oracle.postselect(state, "C", outcome, efficiency=eff)
    ref = oracle.elements_from_state(post)
    p_closed, el = elements_with_probability(closed_params or params, mode)
    errors = {"P": rel_error(p_closed, p_oracle)}
    for name in ELEMENT_NAMES:
        errors[name] = rel_error(getattr(el, name), getattr(ref, name))
    return errors


def oracle_suite(n_max=8, corrupt_tap=False, points=ORACLE_POINTS, with_inefficiency=True):
    """Max relative error per quantity over the oracle parameter sets."""
    worst = dict.fromkeys(("P",) + ELEMENT_NAMES, 0.0)
    cases = []
    for a2, b2, T in points:
        cases.append(_params(a2, b2, T, n_max))
    if with_inefficiency:
        cases.append(_params(0.5, 0.001, 0.5, n_max, det_eff=0.68, placement="subtraction_tap"))
    for i, params in enumerate(cases):
        state = oracle.build_joint_state(params)
        for j, (mode, outcome) in enumerate(ORACLE_MODES):
            closed = params
            if corrupt_tap and i == 0 and j == 0:
                closed = dataclasses.replace(params, tap_T1=params.tap_T1 * 0.99)
            errs = compare_with_oracle(params, mode, outcome, state, closed)
            for k, v in errs.items():
                worst[k] = max(worst[k], v)
    return worst


def baseline_suite(alpha_sq=0.2, beta_sq=0.01, T=0.5, n_max=16):
    """Thermal-loss forms against a four-mode oracle with negligible tail."""
    params = _params(alpha_sq, beta_sq, T, n_max, tap_T1=1.0)
    ref = oracle.elements_from_state(oracle.build_joint_state(params, tap=False))
    el = baseline_elements(params)
    return {name: rel_error(getattr(el, name), getattr(ref, name)) for name in ELEMENT_NAMES}


def random_points(count, seed):
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(count):
        out.append(
            (
                float(rng.uniform(0.05, 1.0)),
                float(rng.uniform(0.0, 0.05)),
                float(rng.uniform(0.2, 0.95)),
                int(rng.integers(0, 2)),
            )
        )
    return out


def dominance_suite(count=10, seed=0, n_max=8, holevo=True):
    """Gaussian extremality on post-selected oracle states.

    For each draw: g-function entropy of the (E, F) and (A, B2) covariance
    minus the exact von Neumann entropy, and Gaussian Holevo minus exact
    Holevo, both with Eve's (E, F, B2) block and through the purification
    of (A, B2).  Returns a list of dicts of slacks.
    """
    rows = []
    for a2, b2, T, use_detector in random_points(count, seed):
        params = _params(a2, b2, T, n_max)
        outcome = "threshold" if use_detector else 1
        post, _ = oracle.postselect(oracle.build_joint_state(params), "C", outcome)
        row = {"alpha_sq": a2, "beta_sq": b2, "T": T, "outcome": str(outcome)}
        for pair in (("E", "F"), ("A", "B2")):
            rho = oracle.reduce(post, pair)
            s_exact = oracle.entropy_exact(rho)
            s_gauss = gausinfo.entropy(oracle.covariance_from_state(rho, pair))
            row["entropy_" + "".join(pair)] = s_gauss - s_exact
        if holevo:
            chi_exact = oracle.holevo_exact(post)
            el = oracle.elements_from_state(post)
            chi_eve = gausinfo.holevo_information(assemble_gamma_efb2(el))
            g_ab = oracle.covariance_from_state(post, ("A", "B2"))
            chi_pur = gausinfo.holevo_from_purification(g_ab)
            row["holevo_eve_block"] = chi_eve - chi_exact
            row["holevo_purification"] = chi_pur - chi_exact
        rows.append(row)
    return rows


def run_verification(n_max=8, seed=0, corrupt_tap=False):
    checks = []
    notes = []

    worst = oracle_suite(n_max, corrupt_tap=corrupt_tap)
    ok = bool(all(v <= REL_TOL for v in worst.values()))
    detail = ", ".join(f"{k} {v:.2e}" for k, v in worst.items())
    checks.append({"name": f"closed form vs oracle (n_max={n_max})", "passed": ok,
                   "detail": "max rel error " + detail,
                   "errors": {k: float(v) for k, v in worst.items()}})

    base = baseline_suite()
    ok = bool(all(v <= REL_TOL for v in base.values()))
    checks.append({"name": "thermal-loss baseline vs oracle", "passed": ok,
                   "detail": "max rel error %.2e" % max(base.values()),
                   "errors": {k: float(v) for k, v in base.items()}})

    rows = dominance_suite(10, seed, n_max)
    for key in ("entropy_EF", "entropy_AB2", "holevo_purification"):
        slack = min(r[key] for r in rows)
        checks.append({"name": f"Gaussian dominance {key}", "passed": bool(slack >= DOMINANCE_SLACK),
                       "detail": f"min slack {slack:.3e}"})
    slack = min(r["holevo_eve_block"] for r in rows)
    notes.append(
        "Holevo from Eve's (E, F, B2) covariance minus exact Holevo: "
        f"min {slack:.3e} (negative means the Eve-block surrogate underestimates Eve)"
    )
    return {"passed": bool(all(c["passed"] for c in checks)), "checks": checks, "notes": notes}
