"""Light-cone delay times, Coulomb-delayed and Liénard-Wiechert fields.

Sign convention: ``sign=+1`` is the advanced (future light-cone) solution,
``sign=-1`` the retarded one.  ``direction`` always points from the source
point to the field point.
"""
from dataclasses import dataclass

import numpy as np

from .errors import (
    InternalInvariantViolation,
    InvalidArgument,
    InvalidWorldLine,
    OutOfDomain,
    SingularSeparation,
)
from .kinematics import coulomb_force, vec3, velocity_of_momentum
from .rootfind import safeguarded_newton

# relative slack allowed when a light-cone root lands on a coverage endpoint
EDGE_SLACK = 1e-11
DEFAULT_D_MIN = 1e-3


@dataclass(frozen=True)
class DelayResult:
    t_delayed: float
    direction: np.ndarray
    separation: float
    residual: float
    sign: int


@dataclass(frozen=True)
class FieldPair:
    electric: np.ndarray
    magnetic: np.ndarray


def _check_sign(sign):
    if sign in (1, "+", "advanced"):
        return 1
    if sign in (-1, "-", "retarded"):
        return -1
    raise InvalidArgument(f"sign must be +1 or -1, got {sign!r}")


def delay_time(source, t, x, sign, v_bar=None):
    """Solve ``s = t + sign * |x - q(s)|`` on the source worldline.

    The function ``g(s) = s - t - sign |x - q(s)|`` has ``g' >= 1 - v_bar``,
    so the root is unique; it is bracketed starting from the light-travel
    bound and found by safeguarded Newton.
    """
    sign = _check_sign(sign)
    x = vec3(x)
    t = float(t)
    vb = source.speed_bound if v_bar is None else v_bar
    if not vb < 1.0:
        raise InvalidWorldLine(f"source speed bound {vb} is not subluminal")
    slack = EDGE_SLACK * (1.0 + abs(t))
    lo_cov, hi_cov = source.t_lo - slack, source.t_hi + slack

    def fdf(s):
        q, v = source.eval(s, 1, slack=slack)
        d = x - q
        r = np.sqrt(d @ d)
        # dg/ds = 1 + sign * (d . v) / r
        return s - t - sign * r, 1.0 + sign * (d @ v) / r if r > 0 else 1.0

    # the partner's own time is on the other side of the root
    s0 = min(max(t, lo_cov), hi_cov)
    g0 = fdf(s0)[0]
    if sign > 0:
        if g0 > 0:
            raise OutOfDomain(
                f"advanced time for t={t} precedes coverage start {source.t_lo}",
                interval=source.interval, side="past")
        lo, g_lo = s0, g0
        hi = lo + max(-g0, 1e-300) / max(1.0 - vb, 1e-3)
        step = hi - lo
        while True:
            hi = min(hi, hi_cov)
            g_hi = fdf(hi)[0]
            if g_hi >= 0:
                break
            if hi >= hi_cov:
                raise OutOfDomain(
                    f"advanced light cone of t={t} leaves coverage at {source.t_hi}",
                    interval=source.interval, side="future")
            lo, g_lo = hi, g_hi
            step *= 2.0
            hi = lo + step
    else:
        if g0 < 0:
            raise OutOfDomain(
                f"retarded time for t={t} is after coverage end {source.t_hi}",
                interval=source.interval, side="future")
        hi, g_hi = s0, g0
        lo = hi - max(g0, 1e-300) / max(1.0 - vb, 1e-3)
        step = hi - lo
        while True:
            lo = max(lo, lo_cov)
            g_lo = fdf(lo)[0]
            if g_lo <= 0:
                break
            if lo <= lo_cov:
                raise OutOfDomain(
                    f"retarded light cone of t={t} leaves coverage at {source.t_lo}",
                    interval=source.interval, side="past")
            hi, g_hi = lo, g_lo
            step *= 2.0
            lo = hi - step
    s, res = safeguarded_newton(fdf, lo, hi, xtol=1e-16, f_lo=g_lo, f_hi=g_hi)
    d = x - source.position(s, slack=slack)
    r = float(np.linalg.norm(d))
    if r == 0.0:
        raise SingularSeparation(f"field point lies on the source worldline at s={s}")
    return DelayResult(s, d / r, r, float(abs(res)), sign)


def delay_rate(source, observer_velocity, d):
    """d t_delayed / d t along an observer moving with ``observer_velocity``.

    Differentiating ``s = t + sign |q_obs(t) - q_src(s)|`` gives
    ``(1 + sign n.v_obs) / (1 + sign n.v_src)``.
    """
    v_obs = vec3(observer_velocity)
    v_src = source.velocity(d.t_delayed, slack=EDGE_SLACK * (1.0 + abs(d.t_delayed)))
    num = 1.0 + d.sign * (d.direction @ v_obs)
    den = 1.0 + d.sign * (d.direction @ v_src)
    if not den > 0 or not num > 0:
        raise InternalInvariantViolation(f"non-positive delay rate factors {num}, {den}")
    return num / den


def coulomb_delayed_field(source, e_src, t, x, sign, d_min=DEFAULT_D_MIN):
    d = delay_time(source, t, x, sign)
    if d.separation < d_min:
        raise SingularSeparation(f"separation {d.separation:.3e} below guard {d_min:.1e}")
    e = e_src * d.direction / d.separation**2
    return FieldPair(e, np.zeros(3))


def lienard_wiechert_field(source, e_src, t, x, sign, d_min=DEFAULT_D_MIN):
    """Advanced (``sign=+1``) or retarded (``sign=-1``) Liénard-Wiechert field.

    ``E = e [(n + s v)(1 - v^2) / (R^2 k^3) + n x ((n + s v) x a) / (R k^3)]``
    with ``k = 1 + s n.v`` and ``B = -s n x E``.
    """
    sign = _check_sign(sign)
    if min(s.degree for s in source.segments) < 2:
        raise InvalidArgument("Liénard-Wiechert fields need acceleration (degree >= 2)")
    d = delay_time(source, t, x, sign)
    if d.separation < d_min:
        raise SingularSeparation(f"separation {d.separation:.3e} below guard {d_min:.1e}")
    _, v, a = source.eval(d.t_delayed, 2, slack=EDGE_SLACK * (1.0 + abs(t)))
    n, R = d.direction, d.separation
    u = n + sign * v
    k = 1.0 + sign * (n @ v)
    near = u * (1.0 - v @ v) / (R**2 * k**3)
    far = np.cross(n, np.cross(u, a)) / (R * k**3)
    e = e_src * (near + far)
    return FieldPair(e, -sign * np.cross(n, e))


def _partner_terms(position, t, partner_line, d_min):
    out = []
    for sign in (1, -1):
        d = delay_time(partner_line, t, position, sign)
        if d.separation < d_min:
            raise SingularSeparation(f"separation {d.separation:.3e} below guard {d_min:.1e}")
        out.append(d)
    return out


def toy_rhs(state, self_params, partner_params, partner_line, d_min=DEFAULT_D_MIN):
    """Right-hand side ``(dq/dt, dp/dt)`` of the Coulomb-delayed model."""
    v = velocity_of_momentum(state.momentum, self_params.mass)
    coupling = self_params.charge * partner_params.charge
    force = np.zeros(3)
    for d in _partner_terms(vec3(state.position), state.time, partner_line, d_min):
        force += coulomb_force(d.direction * d.separation)
    return v, coupling * force


def wf_force(full, state, self_params, partner_params, partner_line, d_min=DEFAULT_D_MIN):
    """Force on a charge from both delayed fields of its partner.

    ``full=True`` uses the Liénard-Wiechert fields including ``v x B``;
    ``full=False`` reproduces the toy force.
    """
    if not full:
        return toy_rhs(state, self_params, partner_params, partner_line, d_min)[1]
    v = velocity_of_momentum(state.momentum, self_params.mass)
    x = vec3(state.position)
    total = np.zeros(3)
    for sign in (1, -1):
        f = lienard_wiechert_field(partner_line, partner_params.charge, state.time, x, sign, d_min)
        total += f.electric + np.cross(v, f.magnetic)
    return self_params.charge * total


# ---- longitudinal-field diagnostics -------------------------------------

def _jacobian(f, x, h):
    """4th-order central-difference Jacobian ``J[a, b] = d f_a / d x_b``."""
    x = vec3(x)
    jac = np.empty((3, 3))
    for b in range(3):
        e = np.zeros(3)
        e[b] = h
        jac[:, b] = (-f(x + 2 * e) + 8 * f(x + e) - 8 * f(x - e) + f(x - 2 * e)) / (12 * h)
    return jac


def numeric_curl(f, x, h):
    j = _jacobian(f, x, h)
    return np.array([j[2, 1] - j[1, 2], j[0, 2] - j[2, 0], j[1, 0] - j[0, 1]])


def numeric_divergence(f, x, h):
    return float(np.trace(_jacobian(f, x, h)))


def field_deviation(source, e_src, t, x, sign, d_min=DEFAULT_D_MIN):
    """``|E - E_par| / |E_par|`` between the Liénard-Wiechert and Coulomb-delayed fields."""
    full = lienard_wiechert_field(source, e_src, t, x, sign, d_min).electric
    par = coulomb_delayed_field(source, e_src, t, x, sign, d_min).electric
    return float(np.linalg.norm(full - par) / np.linalg.norm(par))


def longitudinal_residuals(source, e_src, t, x, sign, rel_step=1e-3, d_min=DEFAULT_D_MIN):
    """Relative ``|curl E_par|`` and ``|div (E - E_par)|`` at the field point ``x``.

    Both are scaled by ``|E_par| / R`` (field strength over distance to the
    delayed source point), the natural size of a first derivative.
    """
    d = delay_time(source, t, x, sign)
    h = rel_step * d.separation

    def par(y):
        return coulomb_delayed_field(source, e_src, t, y, sign, d_min).electric

    def diff(y):
        return lienard_wiechert_field(source, e_src, t, y, sign, d_min).electric - par(y)

    scale = np.linalg.norm(par(x)) / d.separation
    curl = np.linalg.norm(numeric_curl(par, x, h)) / scale
    div = abs(numeric_divergence(diff, x, h)) / scale
    return float(curl), float(div)
