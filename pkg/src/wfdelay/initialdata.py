"""Strip initial data: representation, validation, generation, perturbation.

Two position strips, one per charge, whose end times are chained along light
cones.  With ``j`` the charge whose strip starts first and ``i`` its partner::

    t_i0 = t_i^+(t_j0),   t_j1 = t_j^+(t_i0),   t_i1 = t_i^+(t_j1)

and the equation of motion must hold, with all time derivatives, for charge
``i`` at ``t_i0`` and for charge ``j`` at ``t_j1``.  Those compatibility
conditions are evaluated with truncated Taylor series (see :mod:`jets`).
"""
import math
from dataclasses import dataclass, field

import numpy as np

from . import jets as J
from . import precise as P
from .delayfields import delay_time
from .errors import (
    GuardSpeed,
    InvalidAnchor,
    InvalidArgument,
    OutOfDomain,
    SingularSeparation,
    WFDelayError,
)
from .kinematics import ChargeParams, PhasePoint, vec3, velocity_of_momentum
from .precise import mpf
from .trajectory import Segment, WorldLine

CHAIN_TOL = 1e-10
COMPAT_TOL = 1e-8
DEFAULT_HERMITE_ORDER = 15


@dataclass(frozen=True)
class InitialData:
    """Position strips of both charges with their chained boundary times.

    Strips are worldlines so that a perturbed strip can carry an interior
    piece; generated strips have a single segment.
    """

    line_1: WorldLine
    line_2: WorldLine

    def __post_init__(self):
        if self.line_1.charge.label != 1 or self.line_2.charge.label != 2:
            raise InvalidArgument("strips must carry charge labels 1 and 2 in order")

    @property
    def boundary_times(self):
        return (self.line_1.t_lo, self.line_1.t_hi, self.line_2.t_lo, self.line_2.t_hi)

    @property
    def seed(self):
        """Label of the charge whose strip starts first (``j``)."""
        return 1 if self.line_1.t_lo < self.line_2.t_lo else 2

    @property
    def strip_1(self):
        return self.line_1

    @property
    def strip_2(self):
        return self.line_2

    def line(self, k):
        return self.line_1 if k == 1 else self.line_2

    @property
    def charges(self):
        return self.line_1.charge, self.line_2.charge

    def to_dict(self):
        return {
            "strip_1": self.line_1.to_dict(),
            "strip_2": self.line_2.to_dict(),
            "boundary_times": list(self.boundary_times),
        }

    @classmethod
    def from_dict(cls, d):
        try:
            data = cls(WorldLine.from_dict(d["strip_1"]), WorldLine.from_dict(d["strip_2"]))
        except KeyError as exc:
            raise InvalidArgument(f"initial data missing field {exc}") from exc
        if "boundary_times" in d and [float(x) for x in d["boundary_times"]] != list(data.boundary_times):
            raise InvalidArgument("boundary_times disagree with the strip intervals")
        return data


@dataclass(frozen=True)
class ConditionResult:
    condition: str
    passed: bool
    residual: float
    location: float

    def to_dict(self):
        return {"condition": self.condition, "pass": self.passed,
                "residual": self.residual, "location": self.location}


@dataclass(frozen=True)
class ValidationReport:
    entries: tuple = field(default_factory=tuple)

    @property
    def ok(self):
        return all(e.passed for e in self.entries)

    def failures(self):
        return [e for e in self.entries if not e.passed]

    def to_dict(self):
        return {"ok": self.ok, "entries": [e.to_dict() for e in self.entries]}


# ---- compatibility jets ---------------------------------------------------

def _precise_segment(line, t):
    t = min(max(float(t), line.t_lo), line.t_hi)
    return P.PreciseSegment(line.segments[line.segment_index(t)])


def _strip_source(line, t):
    return J.SegmentSource(_precise_segment(line, t))


def _delay_root(source_line, t, x, sign):
    d = delay_time(source_line, float(t), np.array([float(c) for c in x]), sign)
    return mpf(d.t_delayed)


def pdot_jet(q, m):
    """Jet of dp/dt from a position jet (two orders shorter)."""
    return J.vderiv(J.momentum(J.vderiv(q), m))


def force_jet(x_jet, t0, partner_line, partner_sources, coupling):
    """Jet of ``e_i e_j [F(x - q_j(t^+)) + F(x - q_j(t^-))]`` around ``t0``.

    ``partner_sources`` maps the delay sign to the jet source used for that
    light cone, so one-sided strip ends are expanded from the right piece.
    """
    n = J.order(x_jet[0])
    t_jet = J.ident(t0, n)
    total = None
    for sign in (1, -1):
        s0 = _delay_root(partner_line, t0, J.vvalue(x_jet), sign)
        _, d = J.delay_series(partner_sources[sign], (t_jet, x_jet), sign, s0)
        f = J.force(d)
        total = f if total is None else J.vadd(total, f)
    return J.vscale(coupling, total)


def _compat_residuals(data, k, t0, n_order):
    """Per-order relative residuals of the equation of motion of charge ``k`` at ``t0``.

    Residual of order ``n`` is ``|L^(n) - R^(n)| / (|R^(n)| + |R^(0)| / r^n)``
    with ``r`` the retarded separation, so orders are compared on the scale
    set by the geometry rather than by possibly vanishing derivatives.
    """
    me, other = data.line(k), data.line(3 - k)
    coupling = mpf(me.charge.charge) * mpf(other.charge.charge)
    q = _strip_source(me, t0).jet(mpf(t0), n_order + 2)
    lhs = pdot_jet(q, me.charge.mass)
    x = J.vtruncate(q, n_order)
    sources = {}
    x0 = me.position(t0)
    for sign in (1, -1):
        s_guess = delay_time(other, t0, x0, sign).t_delayed
        sources[sign] = _strip_source(other, s_guess)
    rhs = force_jet(x, mpf(t0), other, sources, coupling)
    sep = delay_time(other, t0, x0, -1).separation
    lhs_d = [J.taylor_to_derivs(a) for a in lhs]
    rhs_d = [J.taylor_to_derivs(a) for a in rhs]
    f0 = math.sqrt(sum(float(c[0]) ** 2 for c in rhs_d))
    out = []
    for m in range(n_order + 1):
        diff = math.sqrt(sum(float(a[m] - b[m]) ** 2 for a, b in zip(lhs_d, rhs_d)))
        mag = math.sqrt(sum(float(b[m]) ** 2 for b in rhs_d))
        out.append(diff / (mag + f0 / sep**m))
    return out


def _index_pair(data):
    j = data.seed
    return 3 - j, j


def validate_initial_data(data, guards):
    """Check the strip conditions; returns a :class:`ValidationReport`.

    (i) separation on the time overlap, (ii) speed bound, (iii) light-cone
    chaining of the boundary times, (iv)/(v) the equation of motion and its
    derivatives up to ``guards.compat_order`` at ``t_i0`` and ``t_j1``.
    """
    entries = []
    i, j = _index_pair(data)
    Li, Lj = data.line(i), data.line(j)

    lo, hi = max(Li.t_lo, Lj.t_lo), min(Li.t_hi, Lj.t_hi)
    if hi >= lo:
        ts = np.linspace(lo, hi, 401)
        seps = np.linalg.norm(Li.sample(ts) - Lj.sample(ts), axis=1)
        k = int(np.argmin(seps))
        entries.append(ConditionResult("(i) separation", bool(seps[k] >= guards.d),
                                       float(seps[k]), float(ts[k])))
    else:
        entries.append(ConditionResult("(i) separation", True, math.inf, lo))

    for k in (1, 2):
        L = data.line(k)
        speeds = [(s.max_speed(), s.a) for s in L.segments]
        v, at = max(speeds)
        entries.append(ConditionResult(f"(ii) speed strip {k}", bool(v <= guards.v_bar), float(v), float(at)))

    # boundary events must be light-like separated in the chained order
    def cone_gap(A, ta, B, tb):
        return (tb - ta) - float(np.linalg.norm(B.position(tb) - A.position(ta)))

    chain = [(cone_gap(Lj, Lj.t_lo, Li, Li.t_lo), Li.t_lo),
             (cone_gap(Li, Li.t_lo, Lj, Lj.t_hi), Lj.t_hi),
             (cone_gap(Lj, Lj.t_hi, Li, Li.t_hi), Li.t_hi)]
    worst = max(chain, key=lambda c: abs(c[0]))
    chained = abs(worst[0]) <= CHAIN_TOL
    entries.append(ConditionResult("(iii) chaining", bool(chained), float(abs(worst[0])), float(worst[1])))

    n = guards.compat_order
    for name, k, t0 in (("(iv)", i, Li.t_lo), ("(v)", j, Lj.t_hi)):
        if not chained:
            entries.append(ConditionResult(f"{name} compatibility", False, math.inf, t0))
            continue
        try:
            with P.workdps(guards.dps):
                res = _compat_residuals(data, k, t0, n)
            worst = max(res)
            entries.append(ConditionResult(f"{name} compatibility", bool(worst <= COMPAT_TOL),
                                           float(worst), float(t0)))
        except WFDelayError:
            entries.append(ConditionResult(f"{name} compatibility", False, math.inf, float(t0)))
    return ValidationReport(tuple(entries))


# ---- generation -----------------------------------------------------------

def cone_anchor(seed, direction):
    """Point on both the future cone of the seed start and the past cone of its end.

    Walks from ``q_j(t_j0)`` along ``direction``; returns ``(t, q)``.
    """
    u = vec3(direction)
    u = u / np.linalg.norm(u)
    ta, tb = seed.t_lo, seed.t_hi
    a, b = seed.position(ta), seed.position(tb)
    T, w = tb - ta, b - a
    # |b - a - r u| = T - r  =>  r = (T^2 - |w|^2) / (2 (T - u.w))
    r = (T * T - w @ w) / (2.0 * (T - u @ w))
    if not 0 < r < T:
        raise InvalidAnchor(f"no cone intersection along direction {u.tolist()}")
    return ta + r, a + r * u


def _check_first_anchor(seed, t, q):
    ta, tb = seed.t_lo, seed.t_hi
    r_fwd = abs(t - ta - np.linalg.norm(q - seed.position(ta)))
    r_bwd = abs(tb - t - np.linalg.norm(seed.position(tb) - q))
    if max(r_fwd, r_bwd) > CHAIN_TOL or not ta < t < tb:
        raise InvalidAnchor(
            f"first anchor (t={t}) is off the light-cone intersection: residuals "
            f"{r_fwd:.3e} (future cone of strip start), {r_bwd:.3e} (past cone of strip end)")


def _jets_at_start(seed, seed_charge, charge, t0, q0, v0, K, coupling):
    """Jets of charge ``i`` at ``t_i0`` from the equation of motion (iterated)."""
    src = {1: _strip_source(seed, seed.t_hi), -1: _strip_source(seed, seed.t_lo)}
    t0m = mpf(t0)
    q = [[mpf(c), mpf(v)] + [mpf(0)] * (K - 1) for c, v in zip(q0, v0)]
    p0 = J.vvalue(J.momentum([[mpf(v)] for v in v0], charge.mass))
    for _ in range(K + 2):
        pdot = force_jet(J.vtruncate(q, K - 2), t0m, seed, src, coupling)
        p = J.vinteg(pdot, p0)
        v = J.velocity(p, charge.mass)
        new = J.vinteg(v, [mpf(c) for c in q0])
        change = max(abs(a - b) for u, w in zip(new, q) for a, b in zip(u, w))
        q = new
        if change == 0:
            break
    return q


def _jets_at_end(seed, seed_charge, charge, q_start, t_start, K, coupling):
    """Second anchor and jets of charge ``i`` at ``t_i1`` from the seed's equation at ``t_j1``.

    With ``x(t) = q_j(t)`` near ``t_j1`` the advanced image is explicit::

        q_i(t_i^+) = x - I(pdot_j / (e_i e_j) - F(x - q_i(t_i^-)))

    and ``t_i^+(t) = t + |I(...)|``; reverting that series gives ``q_i`` as
    a jet in its own time.
    """
    t1 = mpf(seed.t_hi)
    x = _strip_source(seed, seed.t_hi).jet(t1, K + 2)
    pdot = J.vtruncate(pdot_jet(x, seed_charge.mass), K)
    x = J.vtruncate(x, K)
    src = J.JetSource(t_start, q_start)
    _, d_ret = J.delay_series(src, (J.ident(t1, K), x), -1, mpf(t_start))
    z = J.vsub(J.vscale(1 / coupling, pdot), J.force(d_ret))
    y = J.inverse_force(z)
    Q = J.vsub(x, y)
    tau = J.add(J.ident(t1, K), J.vnorm(y))
    return tau, Q


def hermite_segment(a, b, jets_a, jets_b):
    """Two-point Hermite polynomial matching Taylor jets at both ends.

    ``jets_*`` are vector jets (Taylor coefficients in physical time) of
    equal order ``K``; the result has degree ``2K + 1``.
    """
    K = J.order(jets_a[0])
    n = 2 * K + 2
    ma, mb = mpf(a), mpf(b)
    h = (mb - ma) / 2
    # rows: Taylor coefficient k at x = -1 and x = +1 of sum c_m x^m
    rows = []
    for end in (-1, 1):
        for k in range(K + 1):
            rows.append([mpf(math.comb(m, k)) * mpf(end) ** (m - k) if m >= k else mpf(0)
                         for m in range(n)])
    coeffs = []
    for comp in range(3):
        rhs = [jets_a[comp][k] * h**k for k in range(K + 1)] + \
              [jets_b[comp][k] * h**k for k in range(K + 1)]
        mono = _solve(rows, rhs)
        xs = P.cheb_nodes(mpf(-1), mpf(1), n)
        vals = [sum(c * x**m for m, c in enumerate(mono)) for x in xs]
        coeffs.append([float(c) for c in P.cheb_coeffs(vals)])
    return Segment(float(a), float(b), np.array(coeffs))


def _solve(A, y):
    """Gaussian elimination with partial pivoting (extended precision)."""
    n = len(y)
    M = [list(r) + [v] for r, v in zip(A, y)]
    for c in range(n):
        p = max(range(c, n), key=lambda r: abs(M[r][c]))
        M[c], M[p] = M[p], M[c]
        piv = M[c][c]
        for r in range(c + 1, n):
            f = M[r][c] / piv
            if f != 0:
                M[r] = [x - f * w for x, w in zip(M[r], M[c])]
    out = [mpf(0)] * n
    for r in range(n - 1, -1, -1):
        out[r] = (M[r][n] - sum(M[r][k] * out[k] for k in range(r + 1, n))) / M[r][r]
    return out


def _parse_point(pt):
    """``(t, q, v or None)`` from a PhasePoint or a ``(t, q)`` pair."""
    if isinstance(pt, PhasePoint):
        return float(pt.time), vec3(pt.position), pt.momentum
    t, q = pt
    return float(t), vec3(q), None


def generate_initial_data(seed_strip, charges, anchor_points, guards, seed_label=None,
                          hermite_order=DEFAULT_HERMITE_ORDER):
    """Complete a seed strip of charge ``j`` into initial data.

    ``seed_strip``: a WorldLine, or a Segment together with ``seed_label``.
    ``charges``: ``(ChargeParams 1, ChargeParams 2)``.  ``anchor_points``:
    the first anchor of charge ``i`` at ``t_i0`` (a :class:`PhasePoint` or a
    ``(t, q)`` pair), optionally followed by a second anchor ``(t_i1, q)``.
    The first anchor must lie on the light-cone intersection of the seed's
    end points.  A PhasePoint momentum fixes the initial velocity, otherwise
    the chord to the second anchor is used.

    The second anchor is not free: the seed's equation of motion at ``t_j1``
    determines it once the first anchor is placed.  A supplied second anchor
    is checked against the implied point.
    """
    c1, c2 = charges
    if isinstance(seed_strip, Segment):
        if seed_label not in (1, 2):
            raise InvalidArgument("a Segment seed needs seed_label 1 or 2")
        seed = WorldLine(charges[seed_label - 1], (seed_strip.with_rank(0),),
                         guards.compat_order, guards.join_tol)
    else:
        seed = seed_strip
    j = seed.charge.label
    ci, cj = (c2, c1) if j == 1 else (c1, c2)
    coupling = mpf(ci.charge) * mpf(cj.charge)
    if isinstance(anchor_points, PhasePoint) or (
            len(anchor_points) == 2 and np.isscalar(anchor_points[0])):
        anchor_points = (anchor_points,)
    if not 1 <= len(anchor_points) <= 2:
        raise InvalidArgument("anchor_points takes one or two points")
    t0, q0, p0 = _parse_point(anchor_points[0])
    v0 = None if p0 is None else velocity_of_momentum(p0, ci.mass)
    second_anchor = anchor_points[1] if len(anchor_points) == 2 else None
    _check_first_anchor(seed, t0, q0)
    K = int(hermite_order)
    if K < guards.compat_order + 1:
        raise InvalidArgument(f"hermite_order must be at least compat_order + 1 = {guards.compat_order + 1}")
    with P.workdps(guards.dps):
        # the second anchor depends only on the first anchor's position
        q0_jet = [[mpf(c)] for c in q0]
        tau, Q = _jets_at_end(seed, cj, ci, q0_jet, t0, 0, coupling)
        t1 = float(tau[0])
        q1 = np.array([float(a[0]) for a in Q])
        if second_anchor is not None:
            ts, qs, _ = _parse_point(second_anchor)
            if abs(ts - t1) > 1e-8 * (1 + abs(t1)) or np.linalg.norm(qs - q1) > 1e-8 * (1 + np.linalg.norm(q1)):
                raise InvalidAnchor(
                    f"second anchor ({ts}, {qs.tolist()}) is inconsistent with the seed's equation of "
                    f"motion at t={seed.t_hi}; the implied point is ({t1!r}, {q1.tolist()})")
        if not np.linalg.norm(q1 - q0) < t1 - t0:
            raise InvalidAnchor(
                f"implied second anchor ({t1!r}, {q1.tolist()}) is not inside the future light cone "
                f"of the first anchor: no subluminal strip can join them")
        if v0 is None:
            v0 = (q1 - q0) / (t1 - t0)
        if not np.linalg.norm(v0) < guards.v_bar:
            raise GuardSpeed(f"initial velocity {np.linalg.norm(v0):.6f} exceeds v_bar={guards.v_bar}")
        q_start = _jets_at_start(seed, cj, ci, t0, q0, v0, K, coupling)
        tau, Q = _jets_at_end(seed, cj, ci, q_start, t0, K, coupling)
        t_of = J.revert(tau, mpf(seed.t_hi), K)
        q_end = J.vcompose(Q, t_of, mpf(seed.t_hi))
        # boundary times are doubles: re-centre the end jet on the rounded time
        q_end = [J.compose_poly(a, mpf(t1) - tau[0], K) for a in q_end]
        seg = hermite_segment(t0, t1, q_start, q_end)
    if seg.max_speed() > guards.v_bar:
        raise GuardSpeed(f"generated strip reaches speed {seg.max_speed():.6f} > v_bar={guards.v_bar}")
    strip = WorldLine(ci, (seg,), guards.compat_order, guards.join_tol)
    seed_line = WorldLine(cj, seed.segments, guards.compat_order, guards.join_tol)
    lines = (strip, seed_line) if ci.label == 1 else (seed_line, strip)
    return InitialData(*lines)


# ---- perturbation -----------------------------------------------------------

BUMP_POLY_POWER = 16


def bump_profile(shape):
    """Unit-height bump on ``u in [-1, 1]`` as a function of an ``mpf`` argument."""
    if shape == "poly16":
        return lambda u: (1 - u * u) ** BUMP_POLY_POWER
    if shape == "exp":
        import gmpy2

        return lambda u: gmpy2.exp(1 - 1 / (1 - u * u)) if abs(u) < 1 else mpf(0)
    raise InvalidArgument(f"unknown bump shape {shape!r}; use 'poly16' or 'exp'")


def _bump_slope(shape, n=4001):
    """sup |d/du profile| on [-1, 1]."""
    f = bump_profile(shape)
    with P.workdps(30):
        us = np.linspace(-1, 1, n)
        vals = [float(f(mpf(u))) for u in us]
    return float(np.max(np.abs(np.diff(vals) / np.diff(us))))


def _restrict(line, a, b, extra=None, degree=None):
    """Re-expand ``line`` (plus an optional ``extra(t)`` term) on ``[a, b]``."""
    pl = P.PreciseLine(line)
    k = line.segment_index(0.5 * (a + b))
    seg = pl.segments[k]
    deg = degree or line.segments[k].degree

    def f(t):
        v = seg.eval(t, 0)[0]
        if extra is not None:
            e = extra(t)
            v = [x + y for x, y in zip(v, e)]
        return v

    return Segment(a, b, np.array(P.segment_coeffs(f, a, b, deg)))


def perturb_initial_data(data, t_star, s, delta, lam, bump_shape="poly16", directions=None,
                         guards=None, dps=P.DEFAULT_DPS):
    """Add a compactly supported bump of slope ``lam`` to both strips.

    The bump lives on ``[s - delta, s + delta]`` inside the strip overlap and
    away from ``t_star``, so the phase points at ``t_star`` are untouched.
    ``poly16`` is the piecewise polynomial ``(1 - u^2)^16`` (exactly
    representable); ``exp`` is ``exp(1 - 1/(1 - u^2))`` fitted at high degree.
    Returns ``(new_data, report)`` with the re-run validation report.
    """
    from .construction import GuardParams

    guards = guards or GuardParams()
    if lam == 0:
        return data, validate_initial_data(data, guards)
    if not delta > 0:
        raise InvalidArgument("delta must be positive")
    lo = max(data.line_1.t_lo, data.line_2.t_lo)
    hi = min(data.line_1.t_hi, data.line_2.t_hi)
    if not (lo < s - delta and s + delta < hi):
        raise InvalidArgument(f"bump support [{s - delta}, {s + delta}] escapes the strip overlap ({lo}, {hi})")
    if s - delta < t_star < s + delta:
        raise InvalidArgument(f"t_star={t_star} lies inside the bump support")
    prof = bump_profile(bump_shape)
    amp = lam * delta / _bump_slope(bump_shape)
    if directions is None:
        directions = (np.array([0.0, 0.0, 1.0]), np.array([0.0, 0.0, -1.0]))
    a, b = s - delta, s + delta
    lines = []
    with P.workdps(dps):
        for line, direction in zip((data.line_1, data.line_2), directions):
            u_dir = vec3(direction)
            u_dir = u_dir / np.linalg.norm(u_dir)
            ms, md = mpf(s), mpf(delta)

            def extra(t, u_dir=u_dir):
                w = mpf(amp) * prof((t - ms) / md)
                return [w * mpf(c) for c in u_dir]

            deg = max(line.segments[line.segment_index(s)].degree,
                      2 * BUMP_POLY_POWER if bump_shape == "poly16" else 96)
            segs = []
            for k, seg in enumerate(line.segments):
                cuts = [seg.a] + [c for c in (a, b) if seg.a < c < seg.b] + [seg.b]
                if len(cuts) == 2 and not (seg.a >= a and seg.b <= b):
                    segs.append(seg.with_rank(0))
                    continue
                for u, w in zip(cuts, cuts[1:]):
                    inside = u >= a and w <= b
                    segs.append(_restrict(WorldLine(line.charge, (seg,)), u, w,
                                          extra if inside else None, deg if inside else None))
            segs = [sg.with_rank(0) for sg in segs]
            new = WorldLine(line.charge, tuple(segs), line.join_order, line.join_tol)
            if new.speed_bound > guards.v_bar:
                raise GuardSpeed(f"perturbed strip speed {new.speed_bound:.6f} exceeds v_bar={guards.v_bar}")
            lines.append(new)
    out = InitialData(*lines)
    return out, validate_initial_data(out, guards)
