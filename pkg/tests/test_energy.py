import math

import numpy as np
import pytest

from app.models.allocation import Allocation
from app.models.trajectory import Trajectory
from app.services import energy_service
from app.services.optimizer_service import initial_trajectory


def kappa_formula(v, a, rotor):
    v, a = np.asarray(v, dtype=float), np.asarray(a, dtype=float)
    speed = math.sqrt(v @ v)
    F = speed * float(a @ v)
    m, rho, S, g = rotor.m, rotor.rho, rotor.S_FP, rotor.g
    return math.sqrt(1 + (4 * m * m * (a @ a) + rho ** 2 * S ** 2 * speed ** 4 + 4 * m * rho * S * F) / (4 * m * m * g * g))


def energy_formula(v, a, rotor, delta_t):
    speed = math.sqrt(float(np.dot(v, v)))
    kappa = kappa_formula(v, a, rotor)
    b = speed ** 2 / (2 * rotor.v0 ** 2)
    power = (
        rotor.P0 * (1 + 3 * speed ** 2 / rotor.U_tip ** 2)
        + 0.5 * rotor.d0 * rotor.rho * rotor.s_sol * rotor.A_disc * speed ** 3
        + rotor.P_i * kappa * math.sqrt(math.sqrt(kappa ** 2 + b ** 2) - b)
    )
    return delta_t * power


def random_motion(rng, count, v_max=50.0, a_max=30.0):
    v = rng.uniform(-1, 1, (count, 2))
    a = rng.uniform(-1, 1, (count, 2))
    v *= v_max * rng.uniform(0, 1, (count, 1)) / np.linalg.norm(v, axis=1, keepdims=True)
    a *= a_max * rng.uniform(0, 1, (count, 1)) / np.linalg.norm(a, axis=1, keepdims=True)
    return v, a


class TestThrustRatio:
    def test_hover(self, default_cfg):
        assert energy_service.thrust_ratio_kappa([0.0, 0.0], [0.0, 0.0], default_cfg.rotor) == 1.0

    def test_orthogonal_acceleration(self, default_cfg):
        rotor = default_cfg.rotor
        v, a = np.array([10.0, 0.0]), np.array([0.0, 5.0])
        m, rho, S, g = rotor.m, rotor.rho, rotor.S_FP, rotor.g
        expected = math.sqrt(1 + (4 * m * m * 25.0 + rho ** 2 * S ** 2 * 1e4) / (4 * m * m * g * g))
        assert energy_service.thrust_ratio_kappa(v, a, rotor) == pytest.approx(expected, rel=1e-14)

    def test_acceleration_from_hover_is_mass_free(self, default_cfg):
        # Из висения: T/(mg) = √(1 + (a/g)²) при любой массе
        rotor = default_cfg.rotor
        heavy = rotor.scaled_to(4.0 * rotor.m)
        a = np.array([3.0, 4.0])
        expected = math.sqrt(1 + 25.0 / rotor.g ** 2)
        assert energy_service.thrust_ratio_kappa([0.0, 0.0], a, rotor) == pytest.approx(expected, rel=1e-14)
        assert energy_service.thrust_ratio_kappa([0.0, 0.0], a, heavy) == pytest.approx(expected, rel=1e-14)

    def test_random_matches_formula(self, default_cfg, rng):
        v, a = random_motion(rng, 200)
        kappa = energy_service.thrust_ratio_kappa(v, a, default_cfg.rotor)
        expected = [kappa_formula(vi, ai, default_cfg.rotor) for vi, ai in zip(v, a)]
        np.testing.assert_allclose(kappa, expected, rtol=1e-12)

    def test_kappa_hat_hover(self, default_cfg):
        assert energy_service.kappa_hat([0.0, 0.0], [0.0, 0.0], default_cfg.rotor) == 1.0

    def test_kappa_hat_tight_for_parallel_motion(self, default_cfg):
        v, a = np.array([12.0, 5.0]), np.array([2.4, 1.0])
        kappa = energy_service.thrust_ratio_kappa(v, a, default_cfg.rotor)
        kappa_hat = energy_service.kappa_hat(v, a, default_cfg.rotor)
        assert kappa_hat ** 2 - kappa ** 2 == pytest.approx(0.0, abs=1e-12)

    def test_kappa_hat_dominates(self, default_cfg, rng):
        v, a = random_motion(rng, 10_000)
        kappa = energy_service.thrust_ratio_kappa(v, a, default_cfg.rotor)
        kappa_hat = energy_service.kappa_hat(v, a, default_cfg.rotor)
        assert np.all(kappa_hat >= kappa * (1 - 1e-12))


class TestPropulsionEnergy:
    def test_hover_energy(self, default_cfg):
        rotor = default_cfg.rotor
        energy = energy_service.propulsion_energy([0.0, 0.0], [0.0, 0.0], rotor, 1.0)
        assert energy == pytest.approx(rotor.P0 + rotor.P_i, rel=1e-14)

    def test_parasite_dominates_at_high_speed(self, default_cfg):
        rotor = default_cfg.rotor
        speed = 200.0
        parasite = 0.5 * rotor.d0 * rotor.rho * rotor.s_sol * rotor.A_disc * speed ** 3
        energy = energy_service.propulsion_energy([speed, 0.0], [0.0, 0.0], rotor, 1.0)
        assert parasite / energy > 0.9

    def test_random_matches_formula(self, default_cfg, rng):
        v, a = random_motion(rng, 200)
        energy = energy_service.propulsion_energy(v, a, default_cfg.rotor, 1.0)
        expected = [energy_formula(vi, ai, default_cfg.rotor, 1.0) for vi, ai in zip(v, a)]
        np.testing.assert_allclose(energy, expected, rtol=1e-12)

    def test_upper_bound_tight_at_hover(self, default_cfg):
        rotor = default_cfg.rotor
        upper = energy_service.propulsion_energy_upper([0.0, 0.0], [0.0, 0.0], rotor, 1.0)
        assert upper == pytest.approx(rotor.P0 + rotor.P_i, rel=1e-14)

    def test_upper_bound_dominates(self, default_cfg, rng):
        v, a = random_motion(rng, 10_000)
        exact = energy_service.propulsion_energy(v, a, default_cfg.rotor, 1.0)
        upper = energy_service.propulsion_energy_upper(v, a, default_cfg.rotor, 1.0)
        assert np.all(upper >= exact * (1 - 1e-12))

    def test_smoothed_upper_bound_dominates_upper_bound(self, default_cfg, rng):
        v, a = random_motion(rng, 1000)
        upper = energy_service.propulsion_energy_upper(v, a, default_cfg.rotor, 1.0)
        smoothed = energy_service.propulsion_energy_upper(v, a, default_cfg.rotor, 1.0, smoothing=1e-3)
        assert np.all(smoothed >= upper)

    def test_upper_bound_is_convex(self, default_cfg, rng):
        v1, a1 = random_motion(rng, 1000)
        v2, a2 = random_motion(rng, 1000)
        rotor = default_cfg.rotor
        mid = energy_service.propulsion_energy_upper((v1 + v2) / 2, (a1 + a2) / 2, rotor, 1.0)
        ends = (
            energy_service.propulsion_energy_upper(v1, a1, rotor, 1.0)
            + energy_service.propulsion_energy_upper(v2, a2, rotor, 1.0)
        ) / 2
        assert np.all(mid <= ends + 1e-9)


class TestComputingEnergy:
    def test_user_energy_transmission_only(self, default_cfg):
        assert energy_service.user_energy(0, 0.0, default_cfg) == pytest.approx(3.0)

    def test_user_energy_substitution(self, default_cfg):
        cfg = default_cfg.model_copy(
            update={"phi_u": 2.0, "phi_frequency_unit": 1.0, "chi_k": [3.0] * 4, "f_l_k": [7.0] * 4, "P_k": [0.0] * 4}
        )
        assert energy_service.user_energy(0, 5.0, cfg) == pytest.approx(1470.0)

    def test_server_energy(self, default_cfg):
        assert energy_service.server_energy(0, 0.0, 1e9, default_cfg) == 0.0
        cfg = default_cfg.model_copy(update={"phi_s": 1.0, "phi_frequency_unit": 1.0, "chi_k": [2.0] * 4})
        assert energy_service.server_energy(0, 3.0, 4.0, cfg) == pytest.approx(96.0)


class TestEnergyEfficiency:
    def test_no_bits(self, small_cfg):
        alloc = Allocation(l_o=np.zeros(2), l_l=np.zeros(2), f_o=np.full(2, 1e9))
        assert energy_service.energy_efficiency(alloc, initial_trajectory(small_cfg), small_cfg) == 0.0

    def test_hover_single_user_hand_sum(self, single_user_cfg):
        cfg = single_user_cfg
        traj = Trajectory(np.zeros((cfg.N + 1, 2)), cfg.delta_t)
        alloc = Allocation(l_o=[2e6], l_l=[5e5], f_o=[2e9])
        rotor = cfg.rotor
        flight = cfg.N * (rotor.P0 + rotor.P_i)
        user = cfg.T_k[0] * cfg.P_k[0] + cfg.phi_u * cfg.chi_k[0] * 5e5 * cfg.f_l_k[0] ** 2
        server = cfg.phi_s * cfg.chi_k[0] * 2e6 * 4e18
        expected = 2.5e6 / (cfg.alpha_w * flight + user + server)
        assert energy_service.energy_efficiency(alloc, traj, cfg) == pytest.approx(expected, rel=1e-12)
        assert energy_service.min_user_energy_efficiency(alloc, traj, cfg) == pytest.approx(expected, rel=1e-12)

    def test_breakdown_totals(self, small_cfg):
        traj = initial_trajectory(small_cfg)
        alloc = Allocation(l_o=[1e6, 2e6], l_l=[0.0, 1e5], f_o=[1e9, 1e9])
        breakdown = energy_service.energy_breakdown(alloc, traj, small_cfg)
        assert breakdown.E_p.shape == (small_cfg.N,)
        assert breakdown.clamped_slots == ()
        total = small_cfg.alpha_w * breakdown.E_p.sum() + breakdown.E_u.sum() + breakdown.E_s.sum()
        assert breakdown.total_weighted == pytest.approx(total, rel=1e-14)
