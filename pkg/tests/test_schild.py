import math

import numpy as np
import pytest

from wfdelay.errors import InvalidArgument, NoSolutionInWindow
from wfdelay.schild import (
    SchildParams,
    orbit_delay,
    partner_radius,
    schild_delay_check,
    schild_for_omega,
    schild_positions,
    schild_residual,
    schild_solve,
    schild_trajectories,
)


def test_equal_masses_symmetric_orbit(schild):
    p = schild
    assert p.r2 == pytest.approx(1.0, rel=1e-14)
    assert 0 < p.omega * p.delta_t < math.pi / 2
    assert max(p.invariant_residuals().values()) < 1e-10
    # independent check of the delay relation: chord of the two circles
    assert p.delta_t**2 == pytest.approx(2 + 2 * math.cos(p.omega * p.delta_t), rel=1e-13)


def test_residual_and_delay_check(schild):
    assert schild_residual(schild) <= 1e-9
    assert schild_delay_check(schild) <= 1e-10


def test_unequal_masses_balance_both_charges():
    p = schild_solve(1.0, 3.0, 2.0, -0.5, 0.8)
    assert schild_residual(p) <= 1e-9
    assert max(p.invariant_residuals().values()) < 1e-10
    # slow-orbit limit of the pairing condition: m1 r1 = m2 r2
    q = schild_solve(1.0, 3.0, 1e-3, -1e-3, 1.0)
    assert q.m1 * q.r1 == pytest.approx(q.m2 * q.r2, rel=1e-4)


def test_equal_mass_relation_from_proof(schild):
    g = lambda r: 1 / math.sqrt(1 - (schild.omega * r) ** 2)  # noqa: E731
    assert schild.m1 / schild.m2 == pytest.approx(g(schild.r2) / g(schild.r1) * schild.r2 / schild.r1,
                                                  rel=1e-10)


def test_detuned_orbit_is_not_a_solution(schild):
    from dataclasses import replace

    bad = replace(schild, omega=1.01 * schild.omega)
    assert schild_residual(bad) >= 1e-3


def test_force_is_radial(schild):
    from wfdelay.kinematics import coulomb_force

    for t in np.linspace(0, schild.period, 7):
        q1, q2 = schild_positions(schild, t)
        f = sum(coulomb_force(q1 - schild_positions(schild, t + s * schild.delta_t)[1]) for s in (1, -1))
        radial = f @ q1 / np.linalg.norm(q1)
        assert np.linalg.norm(f - radial * q1 / np.linalg.norm(q1)) <= 1e-12 * abs(radial)


def test_slow_limit_delay():
    assert orbit_delay(1.0, 1.0, 1e-6) == pytest.approx(2.0, rel=1e-10)


def test_for_omega_roundtrip():
    p = schild_for_omega(1.0, 1.0, 1.0, 1.0, 0.02)
    assert p.omega * p.r1 == pytest.approx(0.02)
    assert schild_residual(p) <= 1e-9
    assert orbit_delay(p.r1, p.r2, p.omega) == pytest.approx(p.delta_t)
    assert partner_radius(1.0, 1.0, 1.0, 0.02) == pytest.approx(1.0, rel=1e-14)


def test_invalid_inputs():
    with pytest.raises(InvalidArgument):
        schild_solve(-1.0, 1.0, 1.0, -1.0, 1.0)
    with pytest.raises((InvalidArgument, NoSolutionInWindow)):
        schild_solve(1.0, 1.0, 1.0, 1.0, 1.0)  # repulsive: no circular orbit


def test_params_roundtrip_and_trajectories(schild):
    assert SchildParams.from_dict(schild.to_dict()) == schild
    sol = schild_trajectories(schild, horizon_periods=1.0)
    t = 0.37
    assert np.allclose(sol.line_1.position(t),
                       [math.cos(schild.omega * t), math.sin(schild.omega * t), 0], atol=1e-13)


def test_orbit_geometry(schild):
    sol = schild_trajectories(schild, horizon_periods=1.0)
    assert np.allclose(sol.line_1.position(0.0), [schild.r1, 0, 0], atol=1e-14)
    assert np.allclose(sol.line_2.position(0.0), [-schild.r2, 0, 0], atol=1e-14)
    for t in np.linspace(0, schild.period, 13):
        q1, v1 = sol.line_1.eval(t, 1)[:2]
        assert np.linalg.norm(q1) == pytest.approx(schild.r1, abs=1e-13)
        assert np.linalg.norm(v1) == pytest.approx(schild.omega * schild.r1, abs=1e-12)
        assert sol.line_2.position(t)[2] == 0.0


def test_numeric_pipeline_matches_centripetal(schild):
    """toy_rhs through delay solves on polynomial worldlines reproduces m gamma a."""
    from wfdelay.delayfields import toy_rhs
    from wfdelay.kinematics import PhasePoint, lorentz_gamma

    sol = schild_trajectories(schild, horizon_periods=1.0)
    for t in np.linspace(0, schild.period, 5):
        q, p = sol.line_1.position(t), sol.line_1.momentum(t)
        _, f = toy_rhs(PhasePoint(t, q, p), sol.line_1.charge, sol.line_2.charge, sol.line_2)
        a = -schild.omega**2 * q
        want = schild.m1 * lorentz_gamma(schild.omega * schild.r1) * a
        assert np.linalg.norm(f - want) <= 1e-8 * np.linalg.norm(want)
