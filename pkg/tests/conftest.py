import pytest

from elysched import (FinancialParameters, PeriodContext, bundled_scenario_path,
                      load_scenario, make_pea)


@pytest.fixture(scope="session")
def aem_fin():
    """Financials of the case-study AEM module (published cost study)."""
    return FinancialParameters(capex0=8000.0, omf=0.015, ut=20, lf=0.98,
                               r=0.0973, c_su=0.12)


@pytest.fixture(scope="session")
def aem_pea():
    return make_pea("pea1", p_el=2.4, mh2_nom=0.04494)


@pytest.fixture(scope="session")
def hourly_ctx():
    return PeriodContext(c_e=0.05, delta_int=1.0, demand=0.0)


@pytest.fixture(scope="session")
def case_study():
    return load_scenario(bundled_scenario_path("case_study"))


@pytest.fixture(scope="session")
def malfunction():
    return load_scenario(bundled_scenario_path("malfunction"))


@pytest.fixture(scope="session", autouse=True)
def warm_kernels(aem_pea, aem_fin, hourly_ctx):
    """Trigger JIT compilation once so timed tests measure the math only."""
    from elysched.admm import AdmmState, AgentContext, x_update
    state = AdmmState(x=50.0, z=50.0)
    x_update(state, AgentContext(aem_pea, aem_fin, hourly_ctx))
