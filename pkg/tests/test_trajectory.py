import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from wfdelay.errors import (
    FitFailure,
    IntervalMismatch,
    InvalidArgument,
    MonotonicityViolation,
    OutOfDomain,
    SmoothnessViolation,
)
from wfdelay.kinematics import ChargeParams
from wfdelay.trajectory import (
    Segment,
    WorldLine,
    append_segment,
    chebyshev_nodes,
    fit_segment,
    join_mismatch,
    reparameterize,
    segment_from_function,
)

CH = ChargeParams(1.0, 1.0, 1)


def circle(t):
    return np.array([np.cos(0.5 * t), np.sin(0.5 * t), 0.1 * t])


def test_fit_reproduces_smooth_curve():
    seg = segment_from_function(circle, 0.0, 2.0, degree=16)
    ts = np.linspace(0, 2, 101)
    assert np.abs(seg.eval_many(ts) - np.array([circle(t) for t in ts])).max() < 1e-14
    v = seg.eval(1.0, 1)[1]
    assert np.allclose(v, [-0.5 * np.sin(0.5), 0.5 * np.cos(0.5), 0.1], atol=1e-13)


def test_fit_rejects_bad_input():
    with pytest.raises(InvalidArgument):
        fit_segment([0, 1], [[0, 0, 0], [1, 1, 1]], degree=4)
    with pytest.raises(InvalidArgument):
        fit_segment([0, 0, 1], np.zeros((3, 3)), degree=2)
    t = chebyshev_nodes(0, 1, 9)
    y = np.array([circle(s) for s in t])
    with pytest.raises(FitFailure):
        fit_segment(t[:-1], y[:-1], degree=4, holdout=(t[-1:], y[-1:] + 1.0), holdout_tol=1e-10)


def test_append_and_join_checks():
    w = WorldLine(CH, (segment_from_function(circle, 0.0, 1.0),))
    w2 = append_segment(w, segment_from_function(circle, 1.0, 2.0))
    assert w2.t_hi == 2.0 and max(w2.last_join_mismatch) < 1e-7
    w3 = append_segment(w2, segment_from_function(circle, -1.0, 0.0), side="past")
    assert w3.interval == (-1.0, 2.0)
    kinked = segment_from_function(lambda t: circle(t) + [0, 0, 1e-3 * (t - 2) ** 2], 2.0, 3.0)
    with pytest.raises(SmoothnessViolation) as exc:
        append_segment(w3, kinked)
    assert exc.value.mismatches[2] > 1e-6
    with pytest.raises(IntervalMismatch):
        append_segment(w, segment_from_function(circle, 1.5, 2.0))


def test_older_segment_wins_at_joins():
    w = WorldLine(CH, (segment_from_function(circle, 0.0, 1.0),))
    shifted = segment_from_function(lambda t: circle(t) + 1e-13, 1.0, 2.0)
    w2 = append_segment(w, shifted)
    assert np.array_equal(w2.position(1.0), w.position(1.0))
    with pytest.raises(OutOfDomain):
        w2.position(2.5)


@settings(max_examples=20, deadline=None)
@given(st.floats(0.3, 3.0))
def test_reparameterize_inverts_monotone_map(scale):
    t = chebyshev_nodes(0.0, 1.0, 17)
    tau = scale * t + 0.1 * t**2
    q = np.stack([t, t**2, np.zeros_like(t)], axis=1)
    target = np.linspace(tau[0], tau[-1], 7)
    ts, qs, res = reparameterize(t, tau, q, target)
    assert res < 1e-12
    assert np.allclose(scale * ts + 0.1 * ts**2, target, atol=1e-13)
    assert np.allclose(qs[:, 1], ts**2, atol=1e-13)


def test_reparameterize_rejects_nonmonotone():
    t = chebyshev_nodes(0.0, 1.0, 9)
    with pytest.raises(MonotonicityViolation):
        reparameterize(t, -t, np.zeros((9, 3)), [0.0])


def test_worldline_json_roundtrip_bit_exact():
    w = WorldLine(CH, (segment_from_function(circle, 0.0, 1.0), segment_from_function(circle, 1.0, 2.5)))
    w2 = WorldLine.from_dict(json.loads(json.dumps(w.to_dict())))
    rng = np.random.default_rng(7)
    for t in rng.uniform(0.0, 2.5, 1000):
        assert np.array_equal(w.eval(t, 2), w2.eval(t, 2))


def test_segment_validation():
    with pytest.raises(InvalidArgument):
        Segment(1.0, 0.0, np.zeros((3, 2)))
    with pytest.raises(InvalidArgument):
        Segment(0.0, 1.0, np.zeros((2, 2)))
    with pytest.raises(InvalidArgument):
        Segment(0.0, 1.0, np.full((3, 2), np.nan))


def test_join_mismatch_zero_for_same_function():
    a = segment_from_function(circle, 0.0, 1.0)
    b = segment_from_function(circle, 1.0, 2.0)
    # third derivatives of double-precision fits carry ~D^6 eps of round-off
    assert max(join_mismatch(a, b, 1.0, 3)) < 1e-7
