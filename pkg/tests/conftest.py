import os
import warnings

import pytest
from hypothesis import HealthCheck, settings

from cvps import ProtocolParams, TruncationConfig, TruncationWarning

settings.register_profile(
    "default", deadline=None, max_examples=40, suppress_health_check=[HealthCheck.too_slow]
)
settings.register_profile("ci", deadline=None, max_examples=15)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))


def make_params(alpha_sq=0.5, beta_sq=0.001, T=0.5, n_max=8, **kw):
    """Params at a small cutoff with the truncation warning silenced."""
    kw.setdefault("det_eff", 1.0)
    kw.setdefault("det_eff_placement", "none")
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", TruncationWarning)
        return ProtocolParams(
            alpha_sq=alpha_sq, beta_sq=beta_sq, channel_T=T,
            trunc=TruncationConfig(n_max), **kw,
        )


@pytest.fixture
def params_factory():
    return make_params


def pytest_configure(config):
    config._acceptance = []


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    rows = getattr(config, "_acceptance", [])
    if not rows:
        return
    terminalreporter.section("acceptance criteria")
    for number, title, passed, detail in sorted(rows, key=lambda r: r[0]):
        status = "PASS" if passed else "FAIL"
        terminalreporter.write_line(f"[{status}] criterion {number}: {title} | {detail}")
