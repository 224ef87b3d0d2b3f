"""Strip initial data and the light-cone method of steps.

Given position strips for both charges whose end times are chained along
light cones, the solution is extended one particle at a time.  To extend
charge ``A`` into the future, each point ``t`` of the partner ``B`` whose
advanced image on ``A`` is not yet known is used with the inverted force law::

    x      = I(dp_B/dt / (e_A e_B) - F(q_B(t) - q_A(t_A^-(t))))
    t_A^+  = t + |x|
    q_A(t_A^+) = q_B(t) - x

The past direction swaps the roles of advanced and retarded images.
"""
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .delayfields import delay_time, toy_rhs
from .errors import (
    FitFailure,
    GuardSpeed,
    InvalidArgument,
    MonotonicityViolation,
    OutOfDomain,
    SingularSeparation,
    SmoothnessViolation,
    ConstructionInconsistency,
    InternalInvariantViolation,
    ValidationFailure,
)
from . import precise as P
from .precise import mpf
from .kinematics import PhasePoint, coulomb_force, coulomb_inverse, momentum_of_velocity
from .trajectory import (
    DEFAULT_DEGREE,
    Segment,
    WorldLine,
    append_segment,
    chebyshev_nodes,
    fit_segment,
    momentum_rate,
    reparameterize,
)
from .initialdata import (  # noqa: F401  (re-exported)
    ConditionResult,
    InitialData,
    ValidationReport,
    bump_profile,
    generate_initial_data,
    perturb_initial_data,
    validate_initial_data,
)

STEP_DEGREE = 32
MAX_EXCHANGES = 1000
STOP_REASONS = ("reached-horizon", "guard-speed", "guard-separation", "out-of-domain")


@dataclass(frozen=True)
class GuardParams:
    d: float = 1e-3
    v_bar: float = 0.95
    compat_order: int = 3
    join_tol: float = 1e-6
    step_degree: int = STEP_DEGREE
    dps: int = P.DEFAULT_DPS

    def __post_init__(self):
        if not 0.0 < self.v_bar < 1.0:
            raise InvalidArgument(f"v_bar must lie in (0, 1), got {self.v_bar}")
        if not self.d > 0:
            raise InvalidArgument(f"d must be positive, got {self.d}")
        if self.compat_order < 0 or self.step_degree < 2:
            raise InvalidArgument("compat_order >= 0 and step_degree >= 2 required")

    def to_dict(self):
        return {"d": self.d, "v_bar": self.v_bar, "compat_order": self.compat_order,
                "join_tol": self.join_tol, "step_degree": self.step_degree, "dps": self.dps}

    @classmethod
    def from_dict(cls, d):
        return cls(**{k: type(getattr(cls, k))(v) for k, v in d.items()})


@dataclass(frozen=True)
class StepRecord:
    particle: int
    side: str
    interval: tuple
    join_mismatch: tuple
    holdout_residual: float
    chain_defect: float


@dataclass(frozen=True)
class SolutionPair:
    line_1: WorldLine
    line_2: WorldLine
    domains: tuple = None
    stop_reason: str = "reached-horizon"
    steps: tuple = ()

    @classmethod
    def from_lines(cls, l1, l2, stop_reason="reached-horizon", steps=()):
        sol = cls(l1, l2, None, stop_reason, tuple(steps))
        return replace(sol, domains=solution_domains(sol))

    def line(self, k):
        return self.line_1 if k == 1 else self.line_2

    def with_line(self, k, line):
        l1, l2 = (line, self.line_2) if k == 1 else (self.line_1, line)
        return SolutionPair(l1, l2, self.domains, self.stop_reason, self.steps)

    def to_dict(self):
        return {
            "line_1": self.line_1.to_dict(),
            "line_2": self.line_2.to_dict(),
            "domains": [list(d) for d in self.domains],
            "stop_reason": self.stop_reason,
        }

    @classmethod
    def from_dict(cls, d):
        return cls(WorldLine.from_dict(d["line_1"]), WorldLine.from_dict(d["line_2"]),
                   tuple(tuple(x) for x in d["domains"]), d.get("stop_reason", "reached-horizon"))


def solution_domains(sol):
    """Intervals on which each charge sees both delayed partner images.

    ``D_i = (t_i^+(T_j^min), t_i^-(T_j^max))`` clipped to charge ``i``'s
    coverage.
    """
    out = []
    for i in (1, 2):
        a, b = sol.line(i), sol.line(3 - i)
        try:
            lo = delay_time(a, b.t_lo, b.position(b.t_lo), +1).t_delayed
        except OutOfDomain:
            lo = a.t_hi
        try:
            hi = delay_time(a, b.t_hi, b.position(b.t_hi), -1).t_delayed
        except OutOfDomain:
            hi = a.t_lo
        out.append((max(lo, a.t_lo), min(hi, a.t_hi)))
    return tuple(out)


class _GuardStop(Exception):
    def __init__(self, reason, message):
        super().__init__(message)
        self.reason = reason


def _partner_window(sol, a_idx, side):
    """Times on partner ``B`` that feed the next piece of ``A``."""
    A, B = sol.line(a_idx), sol.line(3 - a_idx)
    if side == "future":
        s_lo = delay_time(B, A.t_hi, A.position(A.t_hi), -1).t_delayed
        return s_lo, B.t_hi
    s_hi = delay_time(B, A.t_lo, A.position(A.t_lo), +1).t_delayed
    return B.t_lo, s_hi


def _next_particle(sol, side):
    best, best_len = None, -math.inf
    for k in (1, 2):
        try:
            lo, hi = _partner_window(sol, k, side)
        except OutOfDomain:
            continue
        if hi - lo > best_len:
            best, best_len = k, hi - lo
    if best is None or best_len <= 0:
        raise ConstructionInconsistency("no particle can be extended; light-cone chain broken")
    return best


def inverted_image(B, A, t, sign, coupling, d_min):
    """Image of partner point ``B(t)`` on ``A`` for the unknown delay direction.

    ``sign=+1`` computes the advanced image from the known retarded one,
    ``sign=-1`` the retarded image from the known advanced one.  Returns
    ``(tau, q_A(tau), known separation, new separation)``.  Double precision;
    the construction itself uses the extended-precision variant.
    """
    q, v, a = B.eval(t, 2)
    pdot = momentum_rate(v, a, B.charge.mass)
    known = delay_time(A, t, q, -sign)
    y_known = known.direction * known.separation
    z = pdot / coupling - coulomb_force(y_known)
    x = coulomb_inverse(z)
    r = float(np.linalg.norm(x))
    return t + sign * r, q - x, known.separation, r


def _precise_image(PB, PA, A, t, sign, coupling):
    q, v, a = PB.eval(t, 2)
    pdot = P.momentum_rate(v, a, PB.mass)
    guess = delay_time(A, float(t), np.array([float(c) for c in q]), -sign).t_delayed
    _, y_known = P.polish_delay(PA, t, q, -sign, guess)
    z = P.sub(P.scale(1 / coupling, pdot), P.force(y_known))
    x = P.inverse_force(z)
    r = P.norm(x)
    return t + sign * r, P.sub(q, x), float(P.norm(y_known)), float(r)


def _split_points(PA, PB, A, B, s_lo, s_hi, sign):
    """Partner times that split the window so each piece sees single segments.

    Splits at the partner's own joins and at partner times whose known image
    lands on a join of ``A``; a window mixing pieces on either side would
    interpolate across a round-off kink.
    """
    pts = [s_lo, s_hi]
    for seg in PB.segments[1:]:
        if s_lo < seg.a < s_hi:
            pts.append(seg.a)
    for seg in PA.segments[1:]:
        a = seg.a
        try:
            guess = delay_time(B, float(a), A.position(float(a)), sign).t_delayed
        except OutOfDomain:
            continue
        if not s_lo < guess < s_hi:
            continue
        u, _ = P.polish_delay(PB, a, PA.eval(a)[0], sign, guess)
        if s_lo < u < s_hi:
            pts.append(u)
    inner = sorted(pts[2:])
    min_gap = (s_hi - s_lo) * mpf(1e-6)
    out = [s_lo]
    for u in inner:
        if u - out[-1] > min_gap and s_hi - u > min_gap:
            out.append(u)
    out.append(s_hi)
    return out


def _build_piece(PA0, PB0, A, B, u, w, edge, sign, coupling, guards):
    """One new segment of ``A`` from the partner sub-window ``[u, w]``.

    ``edge`` is the (float) end of the current coverage of ``A`` that the
    piece must start from.
    """
    D = guards.step_degree
    s_mid = float((u + w) / 2)
    PB = P.PinnedLine(PB0, s_mid)
    PA = P.PinnedLine(PA0, delay_time(A, s_mid, B.position(s_mid), -sign).t_delayed)
    nodes = P.cheb_nodes(u, w, 2 * D + 1)
    taus, qs = [], []
    for t in nodes:
        tau, qa, sep_known, sep_new = _precise_image(PB, PA, A, t, sign, coupling)
        if min(sep_known, sep_new) < guards.d:
            raise _GuardStop("guard-separation",
                             f"separation {min(sep_known, sep_new):.3e} below d={guards.d}")
        taus.append(tau)
        qs.append(qa)
    # image time as a Chebyshev series in the partner's time variable
    tau_c = P.cheb_coeffs(taus)
    dtau_c = P.cheb_der(tau_c, 1)
    q_c = [P.cheb_coeffs([q[k] for q in qs]) for k in range(3)]
    xs = [float(x) for x in P.cheb_nodes(mpf(-1), mpf(1), 2 * D + 1)]
    rates = [P.clenshaw(dtau_c, mpf(x)) for x in xs]
    if min(rates) <= 0:
        raise MonotonicityViolation(f"image time not increasing (rate {float(min(rates)):.3e})")
    ftaus = [float(t) for t in taus]
    chain_defect = float(abs((taus[0] if sign > 0 else taus[-1]) - edge))
    lo, hi = (edge, ftaus[-1]) if sign > 0 else (ftaus[0], edge)
    if not hi > lo:
        raise ConstructionInconsistency(f"empty extension [{lo}, {hi}]")

    def image_at(target):
        x0 = float(np.interp(float(target), ftaus, xs))
        x = P.polish_root(tau_c, dtau_c, x0, target, max_iter=40)
        return [P.clenshaw(q_c[k], x) for k in range(3)]

    target = P.cheb_nodes(mpf(lo), mpf(hi), D + 1)
    vals = [image_at(t) for t in target]
    coeffs = np.array([[float(c) for c in P.cheb_coeffs([v[k] for v in vals])]
                       for k in range(3)])
    seg = Segment(lo, hi, coeffs)
    mids = [(a + b) / 2 for a, b in zip(target[1:], target[:-1])]
    holdout = max(float(P.norm(P.sub(image_at(m), [mpf(c) for c in seg.eval(float(m))[0]])))
                  for m in mids)
    return seg, holdout, chain_defect


def _extend_once(sol, side, guards, cache=None):
    """Extend the lagging charge over the whole light-cone window of its partner."""
    a_idx = _next_particle(sol, side)
    A, B = sol.line(a_idx), sol.line(3 - a_idx)
    sign = 1 if side == "future" else -1
    edge = A.t_hi if side == "future" else A.t_lo
    with P.workdps(guards.dps):
        PA, PB = P.PreciseLine(A, cache), P.PreciseLine(B, cache)
        coupling = mpf(A.charge.charge) * mpf(B.charge.charge)
        # partner time whose image lands exactly on the current coverage end
        guess = delay_time(B, edge, A.position(edge), -sign).t_delayed
        s_edge, _ = P.polish_delay(PB, mpf(edge), PA.eval(mpf(edge))[0], -sign, guess)
        s_lo, s_hi = (s_edge, PB.t_hi) if side == "future" else (PB.t_lo, s_edge)
        if not s_hi > s_lo:
            raise ConstructionInconsistency("empty partner window; light-cone chain broken")
        pts = _split_points(PA, PB, A, B, s_lo, s_hi, sign)
        windows = list(zip(pts[:-1], pts[1:]))
        if sign < 0:
            windows.reverse()
        pieces = []
        for u, w in windows:
            seg, holdout, defect = _build_piece(PA, PB, A, B, u, w, edge, sign, coupling, guards)
            pieces.append((seg, holdout, defect))
            edge = seg.b if sign > 0 else seg.a
    out = sol
    for seg, holdout, defect in pieces:
        if seg.max_speed() > guards.v_bar:
            raise _GuardStop("guard-speed", f"speed {seg.max_speed():.6f} exceeds v_bar={guards.v_bar}")
        line = replace(out.line(a_idx), join_order=guards.compat_order, join_tol=guards.join_tol)
        try:
            new_line = append_segment(line, seg, side)
        except SmoothnessViolation as exc:
            raise ConstructionInconsistency(str(exc)) from exc
        rec = StepRecord(a_idx, side, (seg.a, seg.b), tuple(new_line.last_join_mismatch), holdout, defect)
        out = out.with_line(a_idx, new_line)
        out = SolutionPair(out.line_1, out.line_2, out.domains, out.stop_reason, out.steps + (rec,))
    return out


def advance_step(sol, side, guards, cache=None):
    """One leapfrog exchange: extend the lagging charge, then its partner.

    A guard breach leaves the solution as it was before the failing piece
    and sets ``stop_reason``.
    """
    if side not in ("future", "past"):
        raise InvalidArgument(f"side must be 'future' or 'past', got {side!r}")
    cache = {} if cache is None else cache
    for _ in range(2):
        try:
            sol = _extend_once(sol, side, guards, cache)
        except _GuardStop as stop:
            return replace(sol, stop_reason=stop.reason, domains=solution_domains(sol))
        except OutOfDomain:
            return replace(sol, stop_reason="out-of-domain", domains=solution_domains(sol))
    return replace(sol, domains=solution_domains(sol))


def _reached(sol, side, horizon):
    if horizon is None:
        return True
    if side == "future":
        return min(sol.line_1.t_hi, sol.line_2.t_hi) >= horizon
    return max(sol.line_1.t_lo, sol.line_2.t_lo) <= horizon


def _coverage(sol, side):
    if side == "future":
        return [sol.line(k).t_hi for k in (1, 2)]
    return [-sol.line(k).t_lo for k in (1, 2)]


def construct(data, guards=None, horizons=(None, None), validate=True, max_exchanges=MAX_EXCHANGES):
    """Extend strip initial data into the past and future by the method of steps.

    ``horizons = (T_past, T_future)``; ``None`` skips that direction.  Steps
    continue until both charges cover the requested horizon or a guard stops
    the construction; ``stop_reason`` records the first stop encountered.
    """
    guards = GuardParams() if guards is None else guards
    t_past, t_future = horizons
    if validate:
        report = validate_initial_data(data, guards)
        if not report.ok:
            names = ", ".join(e.condition for e in report.failures())
            raise ValidationFailure(f"initial data rejected: {names}", report)
    sol = SolutionPair.from_lines(data.line_1, data.line_2)
    floor = (1.0 - guards.v_bar) * guards.d / 2
    stop = "reached-horizon"
    cache = {}
    for side, horizon in (("future", t_future), ("past", t_past)):
        n = 0
        while not _reached(sol, side, horizon):
            if n >= max_exchanges:
                raise ConstructionInconsistency(f"{side} horizon not reached after {n} exchanges")
            before = _coverage(sol, side)
            nxt = advance_step(sol, side, guards, cache)
            n += 1
            if nxt.stop_reason != "reached-horizon":
                sol = nxt
                stop = stop if stop != "reached-horizon" else nxt.stop_reason
                break
            gained = min(b - a for a, b in zip(before, _coverage(nxt, side)))
            if gained < floor:
                raise InternalInvariantViolation(
                    f"{side} exchange gained only {gained:.3e} < floor {floor:.3e}")
            sol = nxt
        sol = replace(sol, stop_reason="reached-horizon")
    return replace(sol, stop_reason=stop, domains=solution_domains(sol))


def force_scale(sol, k, t):
    """|e_i e_j| / r^2 with r the smaller of the two delayed separations at ``t``."""
    A, B = sol.line(k), sol.line(3 - k)
    q = A.position(t)
    seps = [delay_time(B, t, q, s).separation for s in (1, -1)]
    return abs(A.charge.charge * B.charge.charge) / min(seps) ** 2


def eom_residual(sol, k, t, d_min=0.0):
    """``|dp/dt - e_i e_j (F+ + F-)| / force scale`` for charge ``k`` at ``t``."""
    A, B = sol.line(k), sol.line(3 - k)
    _, v, acc = A.eval(t, 2)
    pdot = momentum_rate(v, acc, A.charge.mass)
    state = PhasePoint(t, A.position(t), momentum_of_velocity(v, A.charge.mass))
    _, f = toy_rhs(state, A.charge, B.charge, B, d_min)
    return float(np.linalg.norm(pdot - f) / force_scale(sol, k, t))


def eom_residuals(sol, k, n_per_segment=None):
    """Residuals of charge ``k`` at ``2 D`` points per segment inside ``D_k``.

    Returns ``(times, residuals)``; see :func:`eom_residual`.
    """
    lo, hi = sol.domains[k - 1]
    ts = []
    for seg in sol.line(k).segments:
        a, b = max(seg.a, lo), min(seg.b, hi)
        if b > a:
            ts.extend(chebyshev_nodes(a, b, n_per_segment or 2 * seg.degree))
    ts = np.unique(np.array(ts, dtype=float))
    return ts, np.array([eom_residual(sol, k, t) for t in ts])
