import dataclasses
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import make_params
from cvps import (
    DomainError,
    PostSelectionError,
    ProtocolParams,
    SubtractionMode,
    TruncationConfig,
    UnphysicalError,
    oracle,
)
from cvps.coeffs import IndexTuple, j_minus, j_plus, subtraction_probability, tmsv_coeff
from cvps.covariance import (
    CovarianceElements,
    CovarianceMatrix,
    assemble_gamma_ab2,
    assemble_gamma_efb2,
    baseline_elements,
    elements,
    elements_with_probability,
)
from cvps.verify import ELEMENT_NAMES, compare_with_oracle, rel_error

COUNTER1 = SubtractionMode.counter(1)
DETECTOR = SubtractionMode.detector()


def _reference_sums(params, s):
    """Literal quadruple sums over (n, k, m, l) with the scalar J kernels."""
    N, T, T1 = params.n_max, params.channel_T, params.tap_T1
    a = [tmsv_coeff(n, params.alpha_sq) for n in range(N + 2)]
    b = [tmsv_coeff(m, params.beta_sq) for m in range(N + 2)]
    a[N + 1] = b[N + 1] = 0.0
    P = V_B2 = C_AB2 = C_EB2 = 0.0
    for n in range(N + 1):
        for k in range(n + 1):
            for m in range(N + 1):
                for l in range(m + 1):
                    idx = IndexTuple(n, k, m, l)
                    bb, e = n - k + l, k + m - l
                    w = a[n] ** 2 * b[m] ** 2
                    jj = j_plus(idx, idx, T, T1, s) + j_minus(idx, idx, T, T1, s)
                    P += w * jj
                    V_B2 += w * max(bb - s, 0) * jj
                    up = IndexTuple(n + 1, k, m, l)
                    C_AB2 += (
                        a[n] * a[n + 1] * b[m] ** 2 * math.sqrt(n + 1)
                        * math.sqrt(max(bb + 1 - s, 0))
                        * (j_plus(idx, up, T, T1, s) + j_minus(idx, up, T, T1, s))
                    )
                    if e > 0:
                        side = IndexTuple(n, k, m, l + 1)
                        C_EB2 += (
                            w * math.sqrt(e) * math.sqrt(max(bb + 1 - s, 0))
                            * (j_plus(idx, side, T, T1, s) + j_minus(idx, side, T, T1, s))
                        )
    return P, {
        "V_B2": 1 + 2 * V_B2 / P,
        "C_AB2": 2 * C_AB2 / P,
        "C_EB2": 2 * C_EB2 / P,
    }


@pytest.mark.parametrize("s", [1, 2])
def test_reference_j_sums(s):
    params = make_params(alpha_sq=0.5, beta_sq=0.05, T=0.4, n_max=3)
    P_ref, ref = _reference_sums(params, s)
    P, el = elements_with_probability(params, SubtractionMode.counter(s))
    assert P == pytest.approx(P_ref, rel=1e-12)
    for name, value in ref.items():
        assert getattr(el, name) == pytest.approx(value, rel=1e-11), name


@pytest.mark.parametrize(
    "mode, outcome",
    [(COUNTER1, 1), (SubtractionMode.counter(2), 2), (DETECTOR, "threshold")],
)
def test_elements_match_oracle(mode, outcome):
    params = make_params(alpha_sq=0.5, beta_sq=0.001, T=0.5, n_max=8)
    errors = compare_with_oracle(params, mode, outcome)
    assert max(errors.values()) <= 1e-9, errors


def test_inefficient_tap_matches_oracle():
    params = make_params(
        alpha_sq=0.7, beta_sq=0.01, T=0.6, n_max=8, det_eff=0.68,
        det_eff_placement="subtraction_tap",
    )
    for mode, outcome in ((COUNTER1, 1), (DETECTOR, "threshold")):
        errors = compare_with_oracle(params, mode, outcome)
        assert max(errors.values()) <= 1e-9, errors


def test_no_noise_means_vacuum_idler():
    el = elements(make_params(alpha_sq=0.8, beta_sq=0.0, T=0.3, n_max=10), COUNTER1)
    assert el.C_EF == 0.0
    assert el.V_F == 1.0
    assert el.C_FB2 == 0.0


def test_q_and_p_quadratures_agree():
    params = make_params(alpha_sq=0.5, beta_sq=0.02, T=0.5, n_max=6)
    post, _ = oracle.postselect(oracle.build_joint_state(params), "C", "threshold")
    g = oracle.covariance_from_state(post).entries
    q, p = slice(0, None, 2), slice(1, None, 2)
    sign = np.array([1.0, -1.0, -1.0, 1.0])  # p-p correlations flip between A|E and B2|F
    expect_p = g[q, q] * np.outer(sign, sign)
    assert np.allclose(g[p, p], expect_p, atol=1e-12)
    # no q-p cross terms at all
    assert np.allclose(g[q, p], 0.0, atol=1e-12)
    # the assembled block carries that sign structure
    el = elements(params, DETECTOR)
    gab = assemble_gamma_ab2(el).entries
    assert gab[0, 2] == pytest.approx(g[0, 2], rel=1e-9)
    assert gab[1, 3] == pytest.approx(g[1, 3], rel=1e-9)


def test_mixture_consistency():
    params = make_params(alpha_sq=0.6, beta_sq=0.01, T=0.4, n_max=8)
    total_p = 0.0
    acc = dict.fromkeys(ELEMENT_NAMES, 0.0)
    for s in range(1, 2 * params.n_max + 1):
        try:
            p, el = elements_with_probability(params, SubtractionMode.counter(s))
        except PostSelectionError:
            continue
        total_p += p
        for name in ELEMENT_NAMES:
            acc[name] += p * getattr(el, name)
    det = elements(params, DETECTOR)
    for name in ELEMENT_NAMES:
        assert getattr(det, name) == pytest.approx(acc[name] / total_p, rel=1e-11), name


@pytest.mark.parametrize("T", [1.0, 0.5, 0.1])
def test_truncation_convergence_at_default_point(T):
    params = ProtocolParams(channel_T=T)
    lower = dataclasses.replace(params, trunc=TruncationConfig(params.n_max - 2))
    for mode in (COUNTER1, DETECTOR):
        a, b = elements(params, mode), elements(lower, mode)
        for name in ELEMENT_NAMES:
            assert abs(getattr(a, name) - getattr(b, name)) < 1e-6, (mode.label, name)


def test_elements_are_physical_on_default_grid():
    for T in (1.0, 0.5, 0.1, 0.01):
        for a2 in (0.1, 1.0, 3.0):
            params = make_params(alpha_sq=a2, beta_sq=0.001, T=T, n_max=30, det_eff=0.68,
                                 det_eff_placement="subtraction_tap")
            for mode in (COUNTER1, DETECTOR):
                el = elements(params, mode).check()
                for gamma in (assemble_gamma_efb2(el), assemble_gamma_ab2(el)):
                    assert gamma.symplectic_eigenvalues().min() >= 1 - 1e-8


@given(
    st.floats(0.01, 2.0), st.floats(0.0, 0.1), st.floats(0.05, 1.0), st.floats(0.3, 0.99),
)
def test_elements_physical_property(a2, b2, T, T1):
    params = make_params(alpha_sq=a2, beta_sq=b2, T=T, n_max=12, tap_T1=T1)
    for mode in (COUNTER1, DETECTOR):
        el = elements(params, mode).check()
        assemble_gamma_efb2(el)
        assemble_gamma_ab2(el)


def test_placements():
    base = make_params(alpha_sq=0.7, beta_sq=0.01, T=0.5, n_max=10, det_eff=0.68,
                       det_eff_placement="none")
    hom = dataclasses.replace(base, det_eff_placement="homodyne")
    tap = dataclasses.replace(base, det_eff_placement="subtraction_tap")
    e0, eh = elements(base, COUNTER1), elements(hom, COUNTER1)
    eta = 0.68
    assert eh.V_B2 == pytest.approx(eta * e0.V_B2 + 1 - eta, rel=1e-14)
    assert eh.C_AB2 == pytest.approx(math.sqrt(eta) * e0.C_AB2, rel=1e-14)
    assert eh.V_A == e0.V_A and eh.C_EF == e0.C_EF
    assert subtraction_probability(tap, COUNTER1) != subtraction_probability(base, COUNTER1)


def test_unit_efficiency_is_neutral():
    p = make_params(alpha_sq=0.7, beta_sq=0.01, T=0.5, n_max=10, det_eff=1.0)
    for place in ("subtraction_tap", "homodyne"):
        q = dataclasses.replace(p, det_eff_placement=place)
        for mode in (COUNTER1, DETECTOR):
            assert elements(q, mode) == elements(p, mode)


def test_errors():
    params = make_params(tap_T1=1.0)
    with pytest.raises(PostSelectionError):
        elements(params, COUNTER1)
    with pytest.raises(DomainError):
        elements(params, SubtractionMode.none())


# ---------------------------------------------------------------- baseline


def test_baseline_identity_channel_is_tmsv():
    el = baseline_elements(make_params(alpha_sq=1.0, beta_sq=0.0, T=1.0))
    assert (el.V_A, el.V_B2, el.V_E, el.V_F) == (3.0, 3.0, 1.0, 1.0)
    assert el.C_AB2 == pytest.approx(math.sqrt(8.0))
    assert el.C_EB2 == 0.0 and el.C_FB2 == 0.0 and el.C_EF == 0.0


def test_baseline_symmetric_point_cancels_eve_signal_term():
    el = baseline_elements(make_params(alpha_sq=0.3, beta_sq=0.3, T=0.5))
    assert el.C_EB2 == 0.0


def test_baseline_matches_oracle():
    params = make_params(alpha_sq=0.2, beta_sq=0.01, T=0.5, n_max=16, tap_T1=1.0)
    ref = oracle.elements_from_state(oracle.build_joint_state(params, tap=False))
    el = baseline_elements(params)
    for name in ELEMENT_NAMES:
        assert rel_error(getattr(el, name), getattr(ref, name)) <= 1e-9, name


def test_baseline_is_keep_everything_limit():
    # summing over every tap outcome leaves the tap as a plain loss on B2
    from cvps.covariance import _homodyne_loss, _moment_sums

    params = make_params(alpha_sq=0.3, beta_sq=0.02, T=0.6, n_max=20)
    P, sums = _moment_sums(params, SubtractionMode.none())
    assert P == pytest.approx(1.0, abs=1e-12)
    base = _homodyne_loss(baseline_elements(params), params.tap_T1)
    for name, total in sums.items():
        value = (1.0 if name.startswith("V") else 0.0) + 2 * total / P
        assert value == pytest.approx(getattr(base, name), rel=1e-10, abs=1e-13), name


# ---------------------------------------------------------------- matrices


def test_assembly_layout():
    vac = CovarianceElements(1, 1, 1, 1, 0, 0, 0, 0)
    assert np.array_equal(assemble_gamma_efb2(vac).entries, np.eye(6))
    assert np.array_equal(assemble_gamma_ab2(vac).entries, np.eye(4))
    el = baseline_elements(make_params(alpha_sq=0.5, beta_sq=0.0, T=1.0))
    g = assemble_gamma_efb2(el).entries
    assert np.array_equal(g[:4, :4], np.eye(4))
    assert np.all(g[:4, 4:] == 0)


def test_unphysical_matrix_reports_eigenvalue():
    bad = CovarianceElements(1, 1, 1, 1, 0.9, 0, 0, 0)
    with pytest.raises(UnphysicalError) as info:
        assemble_gamma_ab2(bad)
    assert info.value.eigenvalue < 1


def test_element_checks():
    with pytest.raises(UnphysicalError):
        CovarianceElements(0.5, 1, 1, 1, 0, 0, 0, 0).check()
    with pytest.raises(UnphysicalError):
        CovarianceElements(1, 1, 1, 1, 1.5, 0, 0, 0).check()


def test_covariance_matrix_validation():
    with pytest.raises(DomainError):
        CovarianceMatrix(np.eye(3), ("A",))
    cm = CovarianceMatrix(np.eye(4), ("A", "B"))
    assert np.array_equal(cm.block("B").entries, np.eye(2))
