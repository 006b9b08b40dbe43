import json

import pytest

from app.core.errors import ScenarioError
from app.repositories.scenario_repository import ScenarioRepository
from app.services import energy_service, scenario_service


def _document(cfg, **changes):
    doc = json.loads(scenario_service.dump_scenario(cfg))
    doc.update(changes)
    return doc


class TestDefaultScenario:
    def test_simulation_parameters(self, default_cfg):
        assert default_cfg.B == 1e6
        assert default_cfg.sigma2 == pytest.approx(1e-19)
        assert default_cfg.beta0 == pytest.approx(1e-4)
        assert default_cfg.M == 1000
        assert default_cfg.H == 100.0
        assert default_cfg.v_max == 50.0
        assert default_cfg.a_max == 30.0
        assert default_cfg.delta_t == 1.0
        assert default_cfg.q0 == (-600.0, 50.0)
        assert default_cfg.qF == (600.0, 50.0)
        assert default_cfg.w_s == (0.0, 800.0)
        assert default_cfg.r_d == 700.0
        assert default_cfg.phi_u == 1e-8
        assert default_cfg.phi_s == 1e-5
        assert default_cfg.C_o == 3e9
        assert default_cfg.alpha_w == 0.02

    def test_capacitance_quoted_per_ghz(self, default_cfg):
        assert default_cfg.phi_frequency_unit == 1e9
        assert default_cfg.user_capacitance == pytest.approx(1e-26, rel=1e-12)
        assert default_cfg.server_capacitance == pytest.approx(1e-23, rel=1e-12)
        # 1 Мбит при 1 ГГц на сервере
        assert energy_service.server_energy(0, 1e6, 1e9, default_cfg) == pytest.approx(1e4, rel=1e-12)

    def test_capacitance_defaults_to_hz(self, small_cfg):
        assert small_cfg.phi_frequency_unit == 1.0
        assert small_cfg.server_capacitance == small_cfg.phi_s

    def test_flying_mass_is_uav_plus_ris(self, default_cfg):
        assert default_cfg.rotor.m == 4.0

    def test_passes_load_validation(self, default_cfg):
        loaded = scenario_service.load_scenario(scenario_service.dump_scenario(default_cfg))
        assert loaded == default_cfg


class TestLoadScenario:
    def test_q0_outside_tether(self, default_cfg):
        with pytest.raises(ScenarioError) as exc:
            scenario_service.load_scenario(_document(default_cfg, q0=[800.0, 0.0]))
        assert exc.value.field == "q0"
        assert "q0 outside tether radius" in exc.value.detail

    def test_endpoints_unreachable(self, default_cfg):
        with pytest.raises(ScenarioError) as exc:
            scenario_service.load_scenario(_document(default_cfg, N=2))
        assert exc.value.field == "N"
        assert "endpoints unreachable" in exc.value.detail

    def test_missing_field_is_named(self, default_cfg):
        doc = _document(default_cfg)
        del doc["H"]
        with pytest.raises(ScenarioError) as exc:
            scenario_service.load_scenario(doc)
        assert exc.value.field == "H"
        assert "missing field" in exc.value.detail

    def test_unknown_field_rejected(self, default_cfg):
        with pytest.raises(ScenarioError):
            scenario_service.load_scenario(_document(default_cfg, gain_db=3.0))

    def test_per_user_length_mismatch(self, default_cfg):
        with pytest.raises(ScenarioError) as exc:
            scenario_service.load_scenario(_document(default_cfg, P_k=[0.1, 0.1]))
        assert exc.value.field == "P_k"

    def test_parse_failure(self):
        with pytest.raises(ScenarioError) as exc:
            scenario_service.load_scenario("{not json")
        assert exc.value.field == "document"

    def test_unattainable_latency(self, default_cfg):
        with pytest.raises(ScenarioError) as exc:
            scenario_service.load_scenario(_document(default_cfg, I_k=[1e9] * 4))
        assert exc.value.field.startswith("I_k")


class TestScenarioVariants:
    def test_with_mission_time(self, default_cfg):
        cfg = scenario_service.with_mission_time(default_cfg, 50.0)
        assert cfg.N == 50
        assert cfg.mission_time == 50.0

    def test_mission_time_not_multiple_of_slot(self, default_cfg):
        with pytest.raises(ScenarioError):
            scenario_service.with_mission_time(default_cfg, 50.5)

    def test_uav_server_mass_and_cpu(self, default_cfg):
        variant = scenario_service.uav_server_scenario(default_cfg)
        assert variant.rotor.m == 22.0
        assert variant.C_o == 1e9

    def test_uav_server_hover_power_exceeds_uris(self, default_cfg):
        variant = scenario_service.uav_server_scenario(default_cfg)
        heavy = energy_service.propulsion_energy([0.0, 0.0], [0.0, 0.0], variant.rotor, 1.0)
        light = energy_service.propulsion_energy([0.0, 0.0], [0.0, 0.0], default_cfg.rotor, 1.0)
        assert heavy > light

    def test_rotor_scaling_keeps_profile_terms(self, default_cfg):
        rotor = default_cfg.rotor.scaled_to(2 * default_cfg.rotor.m)
        assert rotor.P0 == default_cfg.rotor.P0
        assert rotor.P_i == pytest.approx(default_cfg.rotor.P_i * 2 ** 1.5)
        assert rotor.S_FP == pytest.approx(default_cfg.rotor.S_FP * 2)


class TestScenarioRepository:
    def test_save_and_load(self, tmp_path, small_cfg):
        repo = ScenarioRepository(tmp_path)
        repo.save(small_cfg, "s.json")
        cfg, digest = repo.load("s.json")
        assert cfg == small_cfg
        assert digest == scenario_service.scenario_digest((tmp_path / "s.json").read_bytes())

    def test_missing_file_names_path(self, tmp_path):
        path = tmp_path / "absent.json"
        with pytest.raises(ScenarioError) as exc:
            ScenarioRepository().load(path)
        assert str(path) in exc.value.detail
