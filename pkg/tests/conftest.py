from pathlib import Path

import numpy as np
import pytest

from app.models.scenario import ScenarioConfig
from app.repositories.scenario_repository import ScenarioRepository
from app.services import scenario_service


def make_small_scenario(**overrides) -> ScenarioConfig:
    """Небольшой сценарий с хорошо обусловленными числами: K=2, N=12, M=16"""
    K = 2
    fields = dict(
        K=K,
        N=12,
        delta_t=1.0,
        H=100.0,
        q0=(-200.0, 0.0),
        qF=(200.0, 0.0),
        r_d=500.0,
        v_max=50.0,
        a_max=30.0,
        w_s=(0.0, 300.0),
        w_k=[(-100.0, -100.0), (100.0, -100.0)],
        B=1e6,
        sigma2=1e-19,
        beta0=1e-4,
        alpha_L=2.0,
        Mx=4,
        My=4,
        lambda_c=0.1,
        d_sep=0.05,
        P_k=[0.1] * K,
        chi_k=[1e3] * K,
        f_l_k=[1e8] * K,
        T_k=[10.0] * K,
        I_k=[1e6] * K,
        C_o=3e9,
        phi_u=1e-28,
        phi_s=1e-28,
        alpha_w=0.02,
        rotor=scenario_service.default_rotor(4.0),
    )
    fields.update(overrides)
    return scenario_service.validate_scenario(ScenarioConfig(**fields))


@pytest.fixture
def small_cfg() -> ScenarioConfig:
    return make_small_scenario()


@pytest.fixture
def single_user_cfg() -> ScenarioConfig:
    return make_small_scenario(
        K=1,
        w_k=[(0.0, 0.0)],
        P_k=[0.1],
        chi_k=[1e3],
        f_l_k=[1e8],
        T_k=[10.0],
        I_k=[1e6],
    )


@pytest.fixture
def default_cfg() -> ScenarioConfig:
    return scenario_service.default_scenario()


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(0)


@pytest.fixture
def scenario_file(tmp_path: Path, small_cfg: ScenarioConfig) -> Path:
    return ScenarioRepository().save(small_cfg, tmp_path / "scenario.json")
