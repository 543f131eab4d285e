import dataclasses
import warnings

import numpy as np
import pytest

from cvps import ProtocolParams, SubtractionMode, TruncationConfig, TruncationWarning
from cvps.optimize import _rate, max_distance, optimize_alpha, optimize_alpha_at

NONE = SubtractionMode.none()
DETECTOR = SubtractionMode.detector()


@pytest.fixture(scope="module")
def base():
    return ProtocolParams(trunc=TruncationConfig(20))


@pytest.mark.parametrize("mode, d", [(NONE, 30.0), (DETECTOR, 60.0), (NONE, 90.0)])
def test_beats_verification_grid(base, mode, d):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", TruncationWarning)
        res = optimize_alpha(base, mode, d)
    from cvps import distance_to_transmittance

    p = dataclasses.replace(base, channel_T=distance_to_transmittance(d))
    grid = np.logspace(-2, 2, 50)
    best = max(_rate(p, mode, a) for a in grid)
    assert res.best_key_rate >= best - 1e-4
    assert res.best_key_rate >= _rate(p, mode, 1e-2)
    assert res.best_key_rate >= _rate(p, mode, 1e2)
    assert res.bracket == (1e-2, 1e2)


def test_conventional_optimum_shrinks_with_distance(base):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", TruncationWarning)
        alphas = [optimize_alpha(base, NONE, d).best_alpha_sq for d in (20, 40, 60, 80, 95)]
    assert all(b < a for a, b in zip(alphas, alphas[1:])), alphas


def test_deterministic(base):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", TruncationWarning)
        a = optimize_alpha(base, NONE, 40.0)
        b = optimize_alpha(base, NONE, 40.0)
    assert a == b


def test_restart_robustness(base):
    # shifting the coarse grid by one cell leaves the optimum where it was
    p = dataclasses.replace(base, channel_T=0.05)
    ref = optimize_alpha_at(p, DETECTOR)
    shifted = optimize_alpha_at(p, DETECTOR, bracket=(10 ** -1.75, 10 ** 2.25))
    assert shifted.best_alpha_sq == pytest.approx(ref.best_alpha_sq, rel=5e-3)
    assert shifted.best_key_rate == pytest.approx(ref.best_key_rate, rel=1e-5)


def test_all_negative_flag(base):
    p = dataclasses.replace(base, beta_sq=0.5, channel_T=0.01)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", TruncationWarning)
        res = optimize_alpha_at(p, NONE)
    assert res.all_negative and res.best_key_rate <= 0


def test_large_modulation_warns(base):
    with pytest.warns(TruncationWarning):
        res = optimize_alpha(base, NONE, 0.0)
    assert res.tail_mass > base.trunc.tail_tolerance


def test_rejects_negative_distance(base):
    with pytest.raises(ValueError):
        optimize_alpha(base, NONE, -1.0)


def test_zero_when_no_key_at_origin(base, monkeypatch):
    import cvps.optimize as opt

    def hopeless(*args, **kwargs):
        return opt.OptResult(0.1, -1.0, 1, opt.ALPHA_BRACKET, True)

    monkeypatch.setattr(opt, "optimize_alpha", hopeless)
    assert max_distance(base, NONE) == 0.0


def test_huge_noise_leaves_almost_no_range(base):
    # the identity channel at 0 km keeps Eve's noise out, so the range is
    # small but not zero
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", TruncationWarning)
        d = max_distance(dataclasses.replace(base, beta_sq=10.0), NONE)
    assert 0.0 < d < 1.0


def test_bisection_postcondition(base):
    d = max_distance(base, NONE)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", TruncationWarning)
        assert optimize_alpha(base, NONE, d - 0.01).best_key_rate > 0
        assert optimize_alpha(base, NONE, d + 0.01).best_key_rate <= 0
