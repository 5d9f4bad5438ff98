import numpy as np
import pytest

from phonon_laser import preset


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture(params=["model-section", "results-phonon"])
def preset_params(request):
    return preset(request.param)


def threshold_sweep_params(delta_T=300.0):
    """Resonant chain with eps_T/eps_B = 30/25, internal dissipation at infinite temperature."""
    return preset("model-section").replace(
        E_M=(0.0, 2.5, 27.5, 30.0), delta_T=30.0, delta_B=25.0,
        gamma_H=1.0, gamma_C=1.0, T_C=100.0, T_H=100.0 + delta_T,
        gamma_sys12=0.1, gamma_sys34=0.1, T_sys=float("inf"), resonant_only=True,
    )


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.REPORT:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(mod.REPORT):
        terminalreporter.write_line(mod.REPORT[n])
