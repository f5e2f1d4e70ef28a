import numpy as np
import pytest

from epinfer.dataio import ScenarioSpec, generate_scenario
from epinfer.priors import default_prior_config
from epinfer.sampler import SamplerConfig, run_sampler

SCENARIO_SEED = 7


def ci_sampler_config(seed: int) -> SamplerConfig:
    """Desk-scale variant of the default run: J=5 chains, 10k iterations."""
    return SamplerConfig(
        n_chains=5, n_iter=10000, burn_in=4000, thin=6, rng_seed=seed
    )


@pytest.fixture(scope="session")
def scenario_data():
    """(observations, truth) per scenario, fixed seed."""
    return {
        sid: generate_scenario(ScenarioSpec(id=sid, seed=SCENARIO_SEED))
        for sid in ("scn1", "scn2", "scn3")
    }


@pytest.fixture(scope="session")
def ci_fits(scenario_data):
    """One CI-scale posterior fit per scenario (shared across test modules)."""
    fits = {}
    for i, sid in enumerate(("scn1", "scn2", "scn3")):
        obs, _ = scenario_data[sid]
        fits[sid] = run_sampler(obs, default_prior_config(), ci_sampler_config(100 + i))
    return fits


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(12345)
