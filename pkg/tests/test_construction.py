import numpy as np
import pytest

from wfdelay.construction import (GuardParams, SolutionPair, advance_step, construct,
                                  eom_residuals)
from wfdelay.errors import InvalidArgument, ValidationFailure
from wfdelay.initialdata import InitialData
from wfdelay.schild import schild_positions

from conftest import straight_line


@pytest.fixture(scope="module")
def built(schild, strips):
    dT = schild.delta_t
    return construct(strips, GuardParams(), (-2.2 * dT, 5.2 * dT))


def sup_error(p, line, k, n=1500):
    ts = np.linspace(line.t_lo, line.t_hi, n)
    return max(np.linalg.norm(line.position(t) - schild_positions(p, t)[k - 1]) for t in ts)


def test_construct_reproduces_schild(schild, built):
    dT = schild.delta_t
    assert built.stop_reason == "reached-horizon"
    for k in (1, 2):
        L = built.line(k)
        assert L.t_hi >= 5.2 * dT and L.t_lo <= -2.2 * dT
        assert sup_error(schild, L, k) <= 1e-8


def test_domains_are_inside_lines(built):
    for k in (1, 2):
        lo, hi = built.domains[k - 1]
        L = built.line(k)
        assert L.t_lo <= lo < hi <= L.t_hi


def test_equation_of_motion_holds(built):
    for k in (1, 2):
        ts, res = eom_residuals(built, k)
        assert len(ts) > 100
        assert res.max() <= 1e-8


def test_join_records(built):
    assert built.steps
    for rec in built.steps:
        assert rec.particle in (1, 2) and rec.side in ("future", "past")
        assert max(rec.join_mismatch) <= 1e-6


def test_strips_are_preserved_bit_exact(strips, built):
    for k in (1, 2):
        S, L = strips.line(k), built.line(k)
        for t in np.linspace(S.t_lo, S.t_hi, 37):
            assert np.array_equal(S.eval(t, 2), L.eval(t, 2))


def test_horizon_inside_strips_is_a_no_op(schild, strips):
    dT = schild.delta_t
    sol = construct(strips, horizons=(1.5 * dT, 1.5 * dT))
    assert sol.stop_reason == "reached-horizon" and not sol.steps
    for k in (1, 2):
        assert sol.line(k).to_dict() == strips.line(k).to_dict()


def test_construction_is_deterministic(schild, strips):
    g = GuardParams()
    a = advance_step(SolutionPair.from_lines(strips.line_1, strips.line_2), "future", g)
    b = advance_step(SolutionPair.from_lines(strips.line_1, strips.line_2), "future", g)
    assert a.to_dict() == b.to_dict()


def test_each_exchange_makes_progress(schild, strips):
    g = GuardParams()
    sol = SolutionPair.from_lines(strips.line_1, strips.line_2)
    for side in ("future", "past"):
        before = [sol.line(k).t_hi if side == "future" else -sol.line(k).t_lo for k in (1, 2)]
        sol = advance_step(sol, side, g)
        after = [sol.line(k).t_hi if side == "future" else -sol.line(k).t_lo for k in (1, 2)]
        # each charge advances by one delay ~ 2 dT per exchange
        assert min(b - a for a, b in zip(before, after)) > schild.delta_t


def test_separation_guard_stops(schild, strips):
    # the orbit keeps the charges 2 apart, below a guard distance of 2.5
    g = GuardParams(d=2.5)
    with pytest.raises(ValidationFailure):
        construct(strips, g, (None, 6 * schild.delta_t))
    sol = construct(strips, g, (None, 6 * schild.delta_t), validate=False)
    assert sol.stop_reason == "guard-separation"
    assert sol.line_1.t_hi == strips.line_1.t_hi


def test_bad_arguments(strips):
    sol = SolutionPair.from_lines(strips.line_1, strips.line_2)
    with pytest.raises(InvalidArgument):
        advance_step(sol, "sideways", GuardParams())
    with pytest.raises(InvalidArgument):
        GuardParams(v_bar=1.0)
    with pytest.raises(InvalidArgument):
        GuardParams(d=0.0)


def test_guard_params_roundtrip():
    g = GuardParams(d=0.01, v_bar=0.9, step_degree=40)
    assert GuardParams.from_dict(g.to_dict()) == g


def test_solution_roundtrip(built):
    back = SolutionPair.from_dict(built.to_dict())
    assert back.to_dict() == built.to_dict()


def test_resting_pair_validation_failure():
    # charges at rest cannot satisfy the compatibility conditions
    l1 = straight_line([1, 0, 0], [0, 0, 0], 2.0, 6.0, label=1)
    l2 = straight_line([-1, 0, 0], [0, 0, 0], 0.0, 4.0, label=2, charge=-1.0)
    with pytest.raises(ValidationFailure) as exc:
        construct(InitialData(l1, l2), horizons=(None, 10.0))
    assert not exc.value.report.ok
