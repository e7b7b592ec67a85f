import pytest

import varcontracts as vc


def uniform_loss():
    return vc.TruncatedContinuousLoss("uniform", {"high": 1.0}, support_max=1.0)


def trunc_exponential_loss(rate=1.0, support_max=3.0):
    return vc.TruncatedContinuousLoss("exponential", {"rate": rate}, support_max=support_max)


def lognormal_loss(mu=-1.0, sigma=0.5, support_max=3.0):
    return vc.TruncatedContinuousLoss(
        "lognormal", {"mu": mu, "sigma": sigma}, support_max=support_max
    )


def bernoulli_loss(p_loss=0.5, size=10.0):
    return vc.DiscreteLoss(atoms=((0.0, 1.0 - p_loss), (size, p_loss)))


@pytest.fixture(scope="session")
def fair_log_scenario():
    return vc.Scenario(loss=uniform_loss(), utility=vc.LogUtility(), w0=3.0, rho=0.0, nu=0.04)


@pytest.fixture(scope="session")
def fair_log_solution(fair_log_scenario):
    return vc.solve(fair_log_scenario)


@pytest.fixture(scope="session")
def loaded_cara_scenario():
    # var[(X - d*)_+] ~ 0.0115 at rho = 0.2 for this market, so nu = 0.006 binds.
    return vc.Scenario(
        loss=uniform_loss(), utility=vc.CaraUtility(a=1.0), w0=2.0, rho=0.2, nu=0.006
    )


@pytest.fixture(scope="session")
def loaded_cara_solution(loaded_cara_scenario):
    return vc.solve(loaded_cara_scenario)
