"""Circular counter-rotating two-charge orbits with constant light-cone delay.

Both charges revolve about the origin with common angular velocity; charge 1
on radius ``r1`` and charge 2 diametrically opposite on radius ``r2``.  The
advanced and retarded images of the partner sit symmetrically at phase
offsets ``+-omega*dt``, so the net force is radial.  Its magnitude is::

    |e1 e2| * 2 (r1 + r2 cos(omega dt)) / dt**3

which balances the centripetal term ``m1 gamma(omega r1) omega^2 r1``; for
charge 2 the roles of ``r1`` and ``r2`` swap.  Delayed forces are not equal
and opposite, so the two balances together fix the radius ratio through::

    m1 gamma(omega r1) r1 (r2 + r1 c) = m2 gamma(omega r2) r2 (r1 + r2 c),   c = cos(omega dt)

which reduces to ``m1 gamma1 r1 = m2 gamma2 r2`` only for equal masses.
"""
import math
from dataclasses import dataclass

import gmpy2
import numpy as np
from scipy.optimize import brentq

from .errors import InvalidArgument, NoSolutionInWindow
from .kinematics import ChargeParams, coulomb_force, lorentz_gamma
from .precise import DEFAULT_DPS, segment_coeffs, workdps
from .trajectory import DEFAULT_DEGREE, Segment, WorldLine

INVARIANT_TOL = 1e-10


@dataclass(frozen=True)
class SchildParams:
    m1: float
    m2: float
    e1: float
    e2: float
    r1: float
    r2: float
    omega: float
    delta_t: float
    unique_root: bool = True

    @property
    def period(self):
        return 2.0 * math.pi / abs(self.omega)

    @property
    def charges(self):
        return ChargeParams(self.m1, self.e1, 1), ChargeParams(self.m2, self.e2, 2)

    @property
    def force_scale(self):
        """Centripetal force magnitude on charge 1."""
        return self.m1 * lorentz_gamma(abs(self.omega) * self.r1) * self.omega**2 * self.r1

    def invariant_residuals(self):
        """Residual of every defining relation (all should be ~0)."""
        w, r1, r2, dt = self.omega, self.r1, self.r2, self.delta_t
        g1, g2 = lorentz_gamma(abs(w) * r1), lorentz_gamma(abs(w) * r2)
        return {
            "attractive": 0.0 if self.e1 * self.e2 < 0 else 1.0,
            "pair_balance": abs(pair_balance(self.m1, self.m2, r1, r2, w)),
            "window": 0.0 if 0.0 < w * dt < math.pi / 2 else 1.0,
            "delay": abs(dt**2 - (r1**2 + r2**2 + 2 * r1 * r2 * math.cos(w * dt))) / dt**2,
            "force_balance": abs(force_balance(self.m1, self.e1 * self.e2, r1, r2, w, dt))
            / self.force_scale,
            "force_balance_2": abs(force_balance(self.m2, self.e1 * self.e2, r2, r1, w, dt))
            / (self.m2 * g2 * w**2 * r2),
            "subluminal": 0.0 if abs(w) * max(r1, r2) < 1.0 else 1.0,
        }

    def to_dict(self):
        return {k: getattr(self, k) for k in
                ("m1", "m2", "e1", "e2", "r1", "r2", "omega", "delta_t", "unique_root")}

    @classmethod
    def from_dict(cls, d):
        return cls(**{k: (bool(v) if k == "unique_root" else float(v)) for k, v in d.items()})


def force_balance(m1, coupling, r1, r2, omega, delta_t):
    """Centripetal demand minus delivered radial force, for charge 1."""
    need = m1 * lorentz_gamma(abs(omega) * r1) * omega**2 * r1
    give = -coupling * 2.0 * (r1 + r2 * math.cos(omega * delta_t)) / delta_t**3
    return need - give


def small_velocity_delay_squared(m1, coupling, r1, r2, omega):
    """Closed-form dt^2 obtained by balancing against ``2 cos(omega dt)/dt^2``.

    That force modulus is only the leading term for slow orbits; this
    function is kept to measure how far exact orbits depart from it.
    """
    g1 = lorentz_gamma(abs(omega) * r1)
    denom = 1.0 + (r1 * r2 / coupling) * m1 * g1 * r1 * omega**2
    if denom <= 0:
        return math.inf
    return (r1**2 + r2**2) / denom


def pair_balance(m1, m2, r1, r2, omega):
    """Relative mismatch of the two radial balances (zero on an orbit)."""
    c = math.cos(omega * orbit_delay(r1, r2, omega))
    lhs = m1 * lorentz_gamma(abs(omega) * r1) * r1 * (r2 + r1 * c)
    rhs = m2 * lorentz_gamma(abs(omega) * r2) * r2 * (r1 + r2 * c)
    return (lhs - rhs) / lhs


def partner_radius(m1, m2, r1, omega):
    """Radius of charge 2 that lets both charges balance at angular velocity ``omega``."""
    w = abs(omega)
    if w == 0:
        return m1 * r1 / m2
    hi = (1.0 / w) * (1.0 - 1e-12)
    f = lambda r: pair_balance(m1, m2, r1, r, w)  # noqa: E731
    if f(hi) > 0:
        raise NoSolutionInWindow(f"no partner radius balances omega={omega}")
    return brentq(f, 1e-300, hi, xtol=1e-16, rtol=4 * np.finfo(float).eps, maxiter=200)


def orbit_delay(r1, r2, omega):
    """Unique dt in ``[|r1-r2|, r1+r2]`` with ``dt^2 = r1^2 + r2^2 + 2 r1 r2 cos(omega dt)``."""
    h = lambda T: T * T - r1 * r1 - r2 * r2 - 2.0 * r1 * r2 * math.cos(omega * T)
    lo, hi = abs(r1 - r2), r1 + r2
    if h(hi) <= 0:
        return hi
    if lo == 0.0 and h(lo) >= 0:  # pragma: no cover
        return lo
    return brentq(h, lo, hi, xtol=1e-16, rtol=4 * np.finfo(float).eps, maxiter=200)


def _validate_inputs(m1, m2, e1, e2, r1):
    if not (m1 > 0 and m2 > 0 and r1 > 0):
        raise InvalidArgument("masses and radius must be positive")
    if not e1 * e2 < 0:
        raise InvalidArgument("circular orbits need attracting charges (e1*e2 < 0)")


def _omega_residual(m1, m2, coupling, r1, omega):
    r2 = partner_radius(m1, m2, r1, omega)
    dt = orbit_delay(r1, r2, omega)
    return force_balance(m1, coupling, r1, r2, omega, dt) / (m1 * omega**2 * r1 + 1e-300), r2, dt


def omega_window(m1, m2, r1, n_scan=4000):
    """Upper end of the admissible window, where ``omega dt`` reaches pi/2."""
    def phase(w):
        r2 = partner_radius(m1, m2, r1, w)
        return w * orbit_delay(r1, r2, w) - math.pi / 2

    # omega r1 < 1 always; scan up to the light cylinder of charge 1
    ws = np.linspace(0.0, 1.0 / r1, n_scan + 1)[1:-1]
    for a, b in zip(ws, ws[1:]):
        if phase(b) >= 0:
            return brentq(phase, a, b, xtol=1e-15)
    return ws[-1]


def schild_solve(m1, m2, e1, e2, r1, n_scan=2000):
    """Solve for ``(r2, omega, dt)`` given masses, charges and ``r1``.

    Scans ``omega`` in ``(0, omega_max)`` for sign changes of the force
    balance and refines the smallest one with Brent's method.
    """
    _validate_inputs(m1, m2, e1, e2, r1)
    coupling = e1 * e2
    w_max = omega_window(m1, m2, r1)
    ws = np.linspace(0.0, w_max, n_scan + 1)[1:]
    vals = [_omega_residual(m1, m2, coupling, r1, w)[0] for w in ws]
    changes = [k for k in range(len(ws) - 1) if (vals[k] > 0) != (vals[k + 1] > 0)]
    if not changes:
        raise NoSolutionInWindow(
            f"no orbit with 0 < omega*dt < pi/2 for m1={m1}, m2={m2}, e1*e2={coupling}, r1={r1}")
    k = changes[0]
    w = brentq(lambda w: _omega_residual(m1, m2, coupling, r1, w)[0], ws[k], ws[k + 1],
               xtol=1e-16, rtol=4 * np.finfo(float).eps, maxiter=200)
    _, r2, dt = _omega_residual(m1, m2, coupling, r1, w)
    return SchildParams(m1, m2, e1, e2, r1, r2, w, dt, unique_root=len(changes) == 1)


def schild_for_omega(m1, m2, e1, r1, omega):
    """Orbit with prescribed angular velocity; ``e2`` is chosen to balance the force."""
    if not (m1 > 0 and m2 > 0 and r1 > 0 and e1 != 0 and omega > 0):
        raise InvalidArgument("need positive masses, radius, angular velocity and nonzero e1")
    r2 = partner_radius(m1, m2, r1, omega)
    dt = orbit_delay(r1, r2, omega)
    if not omega * dt < math.pi / 2:
        raise NoSolutionInWindow(f"omega*dt = {omega * dt} outside (0, pi/2)")
    need = m1 * lorentz_gamma(omega * r1) * omega**2 * r1
    coupling = -need * dt**3 / (2.0 * (r1 + r2 * math.cos(omega * dt)))
    return SchildParams(m1, m2, e1, coupling / e1, r1, r2, omega, dt)


def schild_positions(p, t):
    """Analytic positions of both charges at time ``t`` (planar, z = 0)."""
    c, s = math.cos(p.omega * t), math.sin(p.omega * t)
    return np.array([p.r1 * c, p.r1 * s, 0.0]), np.array([-p.r2 * c, -p.r2 * s, 0.0])


def schild_derivatives(p, t, order=2):
    """Analytic derivatives ``0..order`` of both positions at ``t``."""
    out1, out2 = np.zeros((order + 1, 3)), np.zeros((order + 1, 3))
    for k in range(order + 1):
        ang = p.omega * t + k * math.pi / 2
        u = (p.omega**k) * np.array([math.cos(ang), math.sin(ang), 0.0])
        out1[k] = p.r1 * u
        out2[k] = -p.r2 * u
    return out1, out2


def schild_worldline(p, which, t_lo, t_hi, degree=DEFAULT_DEGREE, max_phase=1.0):
    """Polynomial worldline of charge ``which`` (1 or 2) on ``[t_lo, t_hi]``."""
    n = max(1, int(math.ceil(abs(p.omega) * (t_hi - t_lo) / max_phase)))
    edges = np.linspace(t_lo, t_hi, n + 1)
    pick = 0 if which == 1 else 1
    sgn = 1 if which == 1 else -1
    r, w = gmpy2.mpfr(p.r1 if which == 1 else p.r2), gmpy2.mpfr(p.omega)

    def f(t):
        return [sgn * r * gmpy2.cos(w * t), sgn * r * gmpy2.sin(w * t), gmpy2.mpfr(0)]

    # coefficients computed in extended precision so high derivatives stay clean
    with workdps(DEFAULT_DPS):
        segs = [Segment(float(a), float(b), np.array(segment_coeffs(f, a, b, degree)), 0)
                for a, b in zip(edges, edges[1:])]
    # exact abutment: consecutive edges are shared floats already
    return WorldLine(p.charges[pick], tuple(segs))


def schild_trajectories(p, t_lo=None, t_hi=None, horizon_periods=3.0, degree=DEFAULT_DEGREE):
    """Both Schild worldlines as a :class:`~wfdelay.construction.SolutionPair`.

    By default the lines span ``horizon_periods`` periods from ``t=0`` plus
    one light-cone delay of margin on each side.
    """
    from .construction import SolutionPair

    if t_lo is None:
        t_lo = -2.0 * p.delta_t
    if t_hi is None:
        t_hi = horizon_periods * p.period + 2.0 * p.delta_t
    l1 = schild_worldline(p, 1, t_lo, t_hi, degree)
    l2 = schild_worldline(p, 2, t_lo, t_hi, degree)
    return SolutionPair.from_lines(l1, l2, stop_reason="reached-horizon")


def schild_residual(p, samples=64):
    """Worst equation-of-motion residual over one period, relative to the force scale.

    Delayed partner positions are placed analytically at ``t +- dt``.
    """
    coupling = p.e1 * p.e2
    worst = 0.0
    masses = (p.m1, p.m2)
    for t in np.linspace(0.0, p.period, samples, endpoint=False):
        d_now = schild_derivatives(p, t, 2)
        for i in (0, 1):
            j = 1 - i
            q, v, a = d_now[i]
            g = 1.0 / math.sqrt(1.0 - v @ v)
            # uniform circular motion: v.a = 0
            lhs = masses[i] * g * a
            rhs = np.zeros(3)
            for s in (1.0, -1.0):
                rhs += coulomb_force(q - schild_positions(p, t + s * p.delta_t)[j])
            worst = max(worst, float(np.linalg.norm(lhs - coupling * rhs)))
    return worst / p.force_scale


def schild_delay_check(p, sol=None):
    """Largest gap between numerically solved delays and the closed-form ``dt``."""
    from .delayfields import delay_time

    if sol is None:
        sol = schild_trajectories(p, horizon_periods=1.0)
    l1, l2 = sol.line_1, sol.line_2
    lo = max(l1.t_lo, l2.t_lo) + 1.5 * p.delta_t
    hi = min(l1.t_hi, l2.t_hi) - 1.5 * p.delta_t
    from .errors import OutOfDomain

    if not hi > lo:
        raise OutOfDomain("worldline horizon shorter than the orbit delay",
                          interval=(l1.t_lo, l1.t_hi))
    worst = 0.0
    for t in np.linspace(lo, hi, 16):
        for src, obs in ((l2, l1), (l1, l2)):
            x = obs.position(t)
            for sign in (1, -1):
                d = delay_time(src, t, x, sign)
                worst = max(worst, abs(sign * (d.t_delayed - t) - p.delta_t))
    return worst


def schild_strips(p, degree=32):
    """Schild orbit cut to one light-cone exchange, as strip initial data.

    Charge 2 covers ``[0, 2 dt]`` and charge 1 ``[dt, 3 dt]``: exactly the
    chaining ``t_1(0) = t_1^+(0)``, ``t_2(1) = t_2^+(t_1(0))``,
    ``t_1(1) = t_1^+(t_2(1))`` of the circular orbit.
    """
    from .initialdata import InitialData

    dt = p.delta_t
    l2 = schild_worldline(p, 2, 0.0, 2 * dt, degree=degree, max_phase=10.0)
    l1 = schild_worldline(p, 1, dt, 3 * dt, degree=degree, max_phase=10.0)
    return InitialData(l1, l2)
