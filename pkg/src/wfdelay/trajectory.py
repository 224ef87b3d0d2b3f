"""Piecewise Chebyshev worldlines with dense derivative output."""
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from numpy.polynomial import chebyshev as C

from .errors import (
    FitFailure,
    IntervalMismatch,
    InvalidArgument,
    MonotonicityViolation,
    OutOfDomain,
    SmoothnessViolation,
)
from .kinematics import ChargeParams, momentum_of_velocity
from .rootfind import safeguarded_newton

DEFAULT_DEGREE = 16
DEFAULT_JOIN_ORDER = 3
DEFAULT_JOIN_TOL = 1e-6


def chebyshev_nodes(a, b, n):
    """``n`` Chebyshev points of the second kind on ``[a, b]``, ascending."""
    if n == 1:
        return np.array([0.5 * (a + b)])
    x = -np.cos(np.pi * np.arange(n) / (n - 1))
    t = 0.5 * (a + b) + 0.5 * (b - a) * x
    t[0], t[-1] = a, b
    return t


@dataclass(frozen=True, eq=False)
class Segment:
    """Polynomial piece on ``[a, b]``; ``coeffs`` has shape ``(3, degree + 1)``."""

    a: float
    b: float
    coeffs: np.ndarray
    rank: int = 0

    def __post_init__(self):
        c = np.array(self.coeffs, dtype=float)
        if c.ndim != 2 or c.shape[0] != 3:
            raise InvalidArgument(f"coefficient table must be (3, D+1), got {c.shape}")
        if not self.a < self.b:
            raise InvalidArgument(f"segment interval [{self.a}, {self.b}] is empty")
        if not np.all(np.isfinite(c)):
            raise InvalidArgument("non-finite segment coefficients")
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)

    @property
    def degree(self):
        return self.coeffs.shape[1] - 1

    @cached_property
    def _derivs(self):
        # derivative coefficient tables in the physical time variable, shape (D+1, 3) each
        scale = 2.0 / (self.b - self.a)
        tables = [self.coeffs.T]
        c = self.coeffs.T
        for k in range(1, self.degree + 1):
            c = C.chebder(c, axis=0) * scale
            tables.append(c)
        tables.append(np.zeros((1, 3)))
        return tables

    def _x(self, t):
        return (2.0 * t - self.a - self.b) / (self.b - self.a)

    def eval(self, t, order=0):
        """Derivatives ``0..order`` at ``t``; shape ``(order + 1, 3)``."""
        x = self._x(t)
        d = self._derivs
        out = np.empty((order + 1, 3))
        for k in range(order + 1):
            out[k] = C.chebval(x, d[min(k, len(d) - 1)]) if k <= self.degree else 0.0
        return out

    def eval_many(self, ts, order=0):
        """Derivative of the given order at many times; shape ``(n, 3)``."""
        x = self._x(np.asarray(ts, dtype=float))
        if order > self.degree:
            return np.zeros((x.size, 3))
        return C.chebval(x, self._derivs[order]).T.reshape(-1, 3)

    def max_speed(self, n=None):
        n = n or 4 * max(self.degree, 4)
        v = self.eval_many(np.linspace(self.a, self.b, n), 1)
        return float(np.max(np.linalg.norm(v, axis=1)))

    def with_rank(self, rank):
        return Segment(self.a, self.b, self.coeffs, rank)

    def to_dict(self):
        return {
            "a": self.a,
            "b": self.b,
            "degree": self.degree,
            "coeffs": self.coeffs.tolist(),
            "rank": self.rank,
        }

    @classmethod
    def from_dict(cls, d):
        coeffs = np.array(d["coeffs"], dtype=float)
        if coeffs.shape != (3, int(d["degree"]) + 1):
            raise InvalidArgument("segment degree does not match coefficient table")
        return cls(float(d["a"]), float(d["b"]), coeffs, int(d.get("rank", 0)))


def segment_from_function(f, a, b, degree=DEFAULT_DEGREE):
    """Interpolate a vector function ``f(t) -> (3,)`` at Chebyshev nodes."""
    t = chebyshev_nodes(a, b, degree + 1)
    y = np.array([f(s) for s in t], dtype=float)
    return fit_segment(t, y, degree, interval=(a, b))


def fit_segment(params, values, degree=DEFAULT_DEGREE, interval=None, holdout=None,
                holdout_tol=None, node_tol=1e-12):
    """Chebyshev fit of degree ``degree`` through ``(params, values)``.

    With exactly ``degree + 1`` samples this is interpolation.  ``holdout``
    is an optional ``(params, values)`` pair withheld from the fit; its worst
    residual is stored on the returned segment as ``holdout_residual`` and
    compared against ``holdout_tol`` when given.
    """
    s = np.asarray(params, dtype=float)
    y = np.asarray(values, dtype=float).reshape(-1, 3)
    if s.ndim != 1 or s.size != y.shape[0]:
        raise InvalidArgument("parameter and value arrays disagree in length")
    if s.size < degree + 1:
        raise InvalidArgument(f"need at least {degree + 1} samples for degree {degree}, got {s.size}")
    if np.any(np.diff(s) <= 0):
        raise InvalidArgument("sample parameters must be strictly increasing")
    a, b = interval if interval is not None else (s[0], s[-1])
    x = (2.0 * s - a - b) / (b - a)
    if s.size == degree + 1:
        V = C.chebvander(x, degree)
        coeffs = np.linalg.solve(V, y).T
    else:
        coeffs = C.chebfit(x, y, degree).T
    seg = Segment(a, b, coeffs)
    fitted = seg.eval_many(s)
    node_res = float(np.max(np.linalg.norm(fitted - y, axis=1) / (1.0 + np.linalg.norm(y, axis=1))))
    if s.size == degree + 1 and node_res > node_tol:
        raise FitFailure(f"interpolation residual {node_res:.3e} exceeds {node_tol:.1e}")
    object.__setattr__(seg, "node_residual", node_res)
    hold_res = None
    if holdout is not None:
        hs, hy = np.asarray(holdout[0], float), np.asarray(holdout[1], float).reshape(-1, 3)
        hold_res = float(np.max(np.linalg.norm(seg.eval_many(hs) - hy, axis=1)
                                / (1.0 + np.linalg.norm(hy, axis=1))))
        if holdout_tol is not None and hold_res > holdout_tol:
            raise FitFailure(f"held-out residual {hold_res:.3e} exceeds {holdout_tol:.1e}")
    object.__setattr__(seg, "holdout_residual", hold_res)
    return seg


@dataclass(frozen=True, eq=False)
class WorldLine:
    """Contiguous chain of segments for one charge.

    At a shared endpoint the older segment (lower ``rank``) wins, so
    extending a worldline never changes values it already produced.
    """

    charge: ChargeParams
    segments: tuple
    join_order: int = DEFAULT_JOIN_ORDER
    join_tol: float = DEFAULT_JOIN_TOL

    def __post_init__(self):
        segs = tuple(self.segments)
        if not segs:
            raise InvalidArgument("worldline needs at least one segment")
        for left, right in zip(segs, segs[1:]):
            if left.b != right.a:
                raise IntervalMismatch(f"segments do not abut: {left.b} vs {right.a}")
        object.__setattr__(self, "segments", segs)

    @property
    def t_lo(self):
        return self.segments[0].a

    @property
    def t_hi(self):
        return self.segments[-1].b

    @property
    def interval(self):
        return (self.t_lo, self.t_hi)

    @cached_property
    def _starts(self):
        return np.array([s.a for s in self.segments])

    @cached_property
    def speed_bound(self):
        """Largest speed seen on a dense grid of every segment."""
        return max(s.max_speed() for s in self.segments)

    def covers(self, t, slack=0.0):
        return self.t_lo - slack <= t <= self.t_hi + slack

    def segment_index(self, t, slack=0.0):
        if not self.covers(t, slack):
            raise OutOfDomain(
                f"t={t!r} outside worldline coverage [{self.t_lo!r}, {self.t_hi!r}]",
                interval=self.interval,
                side="future" if t > self.t_hi else "past",
            )
        k = int(np.searchsorted(self._starts, t, side="right")) - 1
        k = min(max(k, 0), len(self.segments) - 1)
        if k > 0 and t == self.segments[k].a and self.segments[k - 1].rank < self.segments[k].rank:
            k -= 1
        return k

    def eval(self, t, order=0, slack=0.0):
        """Position and derivatives up to ``order``; shape ``(order + 1, 3)``."""
        t = float(t)
        return self.segments[self.segment_index(t, slack)].eval(t, order)

    def position(self, t, slack=0.0):
        return self.eval(t, 0, slack)[0]

    def velocity(self, t, slack=0.0):
        return self.eval(t, 1, slack)[1]

    def momentum(self, t):
        return momentum_of_velocity(self.velocity(t), self.charge.mass)

    def momentum_rate(self, t, slack=0.0):
        """dp/dt from exact derivatives of the polynomial pieces."""
        _, v, a = self.eval(t, 2, slack)
        return momentum_rate(v, a, self.charge.mass)

    def sample(self, ts, order=0):
        ts = np.asarray(ts, dtype=float)
        out = np.empty((ts.size, 3))
        idx = np.array([self.segment_index(t) for t in ts], dtype=int)
        for k in np.unique(idx):
            m = idx == k
            out[m] = self.segments[k].eval_many(ts[m], order)
        return out

    def restricted(self, a, b):
        """Segments wholly inside ``[a, b]`` (used to compare against strips)."""
        return [s for s in self.segments if s.a >= a and s.b <= b]

    def to_dict(self):
        return {
            "charge": self.charge.to_dict(),
            "join_order": self.join_order,
            "join_tol": self.join_tol,
            "segments": [s.to_dict() for s in self.segments],
        }

    @classmethod
    def from_dict(cls, d):
        return cls(
            ChargeParams.from_dict(d["charge"]),
            tuple(Segment.from_dict(s) for s in d["segments"]),
            int(d.get("join_order", DEFAULT_JOIN_ORDER)),
            float(d.get("join_tol", DEFAULT_JOIN_TOL)),
        )


def momentum_rate(v, a, m):
    """d/dt of m*gamma(v)*v given velocity and acceleration."""
    v2 = v @ v
    g = 1.0 / np.sqrt(1.0 - v2)
    return m * (g * a + g**3 * (v @ a) * v)


def join_mismatch(left, right, t, order):
    """Relative mismatch of derivatives ``0..order`` between two pieces at ``t``."""
    dl = left.eval(t, order)
    dr = right.eval(t, order)
    out = []
    pos_scale = 1.0 + np.linalg.norm(dl[0])
    for k in range(order + 1):
        scale = max(np.linalg.norm(dl[k]), np.linalg.norm(dr[k])) + 1e-12 * pos_scale
        out.append(float(np.linalg.norm(dl[k] - dr[k]) / scale))
    return out


def append_segment(w, seg, side="future", check=True):
    """Return a new worldline with ``seg`` glued on the given side."""
    rank = max(s.rank for s in w.segments) + 1
    seg = seg.with_rank(rank)
    if side == "future":
        if seg.a != w.t_hi:
            raise IntervalMismatch(f"segment starts at {seg.a!r}, coverage ends at {w.t_hi!r}")
        left, right, t_join = w.segments[-1], seg, w.t_hi
        segs = w.segments + (seg,)
    elif side == "past":
        if seg.b != w.t_lo:
            raise IntervalMismatch(f"segment ends at {seg.b!r}, coverage starts at {w.t_lo!r}")
        left, right, t_join = seg, w.segments[0], w.t_lo
        segs = (seg,) + w.segments
    else:
        raise InvalidArgument(f"side must be 'future' or 'past', got {side!r}")
    mism = join_mismatch(left, right, t_join, w.join_order)
    if check:
        bad = [(k, m) for k, m in enumerate(mism) if m > w.join_tol]
        if bad:
            k, m = bad[0]
            raise SmoothnessViolation(
                f"join at t={t_join!r}: order-{k} mismatch {m:.3e} exceeds {w.join_tol:.1e}",
                mismatches=mism,
            )
    out = WorldLine(w.charge, segs, w.join_order, w.join_tol)
    object.__setattr__(out, "last_join_mismatch", mism)
    return out


def reparameterize(t, tau, q, target_tau, tol=1e-12, max_iter=100):
    """Resample ``q`` as a function of a monotone parameter ``tau(t)``.

    ``t``, ``tau`` and ``q`` are samples of a parametric curve at Chebyshev
    nodes of ``[t[0], t[-1]]``.  For every target ``tau*`` the node value
    ``t*`` with ``tau(t*) = tau*`` is found on the interpolant of ``tau``
    and ``q(t*)`` is returned.  Yields ``(t_star, q_star, max_tau_residual)``.
    """
    t = np.asarray(t, float)
    tau = np.asarray(tau, float)
    q = np.asarray(q, float).reshape(-1, 3)
    if np.any(np.diff(t) <= 0):
        raise InvalidArgument("curve parameter must be strictly increasing")
    if np.any(np.diff(tau) <= 0):
        raise MonotonicityViolation("tau(t) is not strictly increasing over the samples")
    deg = t.size - 1
    a, b = t[0], t[-1]
    x = (2.0 * t - a - b) / (b - a)
    V = C.chebvander(x, deg)
    c_tau = np.linalg.solve(V, tau)
    c_q = np.linalg.solve(V, q)
    c_rate = C.chebder(c_tau) * (2.0 / (b - a))
    check = np.linspace(-1.0, 1.0, 8 * (deg + 1))
    if np.any(C.chebval(check, c_rate) <= 0):
        raise MonotonicityViolation("interpolated tau(t) has a non-positive rate")

    def fdf(s, target):
        xs = (2.0 * s - a - b) / (b - a)
        return C.chebval(xs, c_tau) - target, C.chebval(xs, c_rate)

    target_tau = np.atleast_1d(np.asarray(target_tau, float))
    lo_tau, hi_tau = tau[0], tau[-1]
    t_star = np.empty(target_tau.size)
    worst = 0.0
    for k, ts in enumerate(target_tau):
        slack = 1e-12 * (1.0 + abs(ts))
        if ts < lo_tau - slack or ts > hi_tau + slack:
            raise OutOfDomain(f"tau*={ts!r} outside [{lo_tau!r}, {hi_tau!r}]", interval=(lo_tau, hi_tau))
        # linear guess from the sample table
        x0 = float(np.interp(ts, tau, t))
        root, res = safeguarded_newton(
            lambda s: fdf(s, ts), a, b, x0=x0, xtol=1e-16, max_iter=max_iter,
            f_lo=tau[0] - ts, f_hi=tau[-1] - ts,
        )
        t_star[k] = root
        worst = max(worst, abs(res) / (1.0 + abs(ts)))
    if worst > tol:
        raise FitFailure(f"reparameterization residual {worst:.3e} exceeds {tol:.1e}")
    xs = (2.0 * t_star - a - b) / (b - a)
    q_star = C.chebval(xs, c_q).T.reshape(-1, 3)
    return t_star, q_star, worst
