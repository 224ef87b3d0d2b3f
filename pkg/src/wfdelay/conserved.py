"""Energy functional of the two-charge delay model and its conservation audit.

For a solution on ``D_1 x D_2``::

    H(t1, t2) = sum_i sqrt(p_i^2 + m_i^2)
              + 1/2 sum_i sum_{j!=i} e_i e_j sum_(+-) 1 / |q_i(t_i) - q_j(t_j^(+-)(t_i))|
              + 1/2 sum_i sum_{j!=i} e_i e_j sum_(+-) int_{t_i}^{t_i^(-+)(t_j)}
                    F(q_i(s) - q_j(t_j^(+-)(s))) . dq_i/ds ds

is independent of both arguments.  The integrals are signed (the upper
limit may precede the lower one).  Note the pairing: the integrand built
from the advanced partner image is integrated up to the retarded image of
``t_j`` on ``i`` and vice versa; see the decisions ledger.
"""
import csv
import io
import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass

import numpy as np

from .delayfields import delay_time
from .errors import InvalidArgument, OutOfDomain, QuadratureFailure
from .kinematics import coulomb_force

GL_ORDER = 15
_GL_X, _GL_W = np.polynomial.legendre.leggauss(GL_ORDER)
DOMAIN_SLACK = 1e-9


def worker_count():
    """Thread cap from ``WFDELAY_THREADS`` (default 1, i.e. sequential)."""
    raw = os.environ.get("WFDELAY_THREADS", "1")
    try:
        n = int(raw)
    except ValueError:
        raise InvalidArgument(f"WFDELAY_THREADS must be an integer, got {raw!r}") from None
    return max(1, n)


@dataclass(frozen=True)
class QuadratureConfig:
    rel_tol: float = 1e-12
    abs_tol: float = 1e-14
    max_subdivisions: int = 200

    def __post_init__(self):
        if not (self.rel_tol > 0 and self.abs_tol > 0):
            raise InvalidArgument("quadrature tolerances must be positive")
        if self.max_subdivisions < 1:
            raise InvalidArgument("max_subdivisions must be >= 1")

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, d):
        return cls(float(d.get("rel_tol", cls.rel_tol)), float(d.get("abs_tol", cls.abs_tol)),
                   int(d.get("max_subdivisions", cls.max_subdivisions)))


@dataclass(frozen=True)
class EnergyBreakdown:
    kinetic: float
    potential: float
    interaction_integral: float
    total: float

    def to_dict(self):
        return asdict(self)


def _panel(f, a, b):
    mid, half = 0.5 * (a + b), 0.5 * (b - a)
    return half * sum(w * f(mid + half * x) for x, w in zip(_GL_X, _GL_W))


def adaptive_gauss(f, a, b, quad):
    """Signed integral of ``f`` over ``[a, b]`` by adaptive 15-point Gauss-Legendre.

    Each panel is compared against the sum over its two halves; panels are
    refined in a fixed order so results are reproducible.  Returns
    ``(value, error_estimate)``.
    """
    if a == b:
        return 0.0, 0.0
    sign = 1.0
    if b < a:
        a, b, sign = b, a, -1.0
    whole = _panel(f, a, b)
    todo = [(a, b, whole)]
    total, err, used = 0.0, 0.0, 1
    while todo:
        lo, hi, val = todo.pop()
        mid = 0.5 * (lo + hi)
        left, right = _panel(f, lo, mid), _panel(f, mid, hi)
        e = abs(left + right - val)
        scale = max(abs(whole), abs(left + right))
        if e <= max(quad.abs_tol * (hi - lo) / (b - a), quad.rel_tol * scale) or hi - lo < 1e-14 * (b - a):
            total += left + right
            err += e
            continue
        used += 1
        if used > quad.max_subdivisions:
            raise QuadratureFailure(
                f"no convergence on [{a}, {b}] after {quad.max_subdivisions} subdivisions",
                error_estimate=err + e)
        todo.append((mid, hi, right))
        todo.append((lo, mid, left))
    return sign * total, err


def _check_domain(sol, k, t):
    lo, hi = sol.domains[k - 1]
    slack = DOMAIN_SLACK * (1.0 + abs(t))
    if not lo - slack <= t <= hi + slack:
        raise OutOfDomain(f"t{k}={t!r} outside solution domain D_{k} = [{lo!r}, {hi!r}]",
                          interval=(lo, hi))


def _delay(line, t, x, sign, what):
    try:
        return delay_time(line, t, x, sign)
    except OutOfDomain as exc:
        raise OutOfDomain(f"{what}: {exc}", interval=exc.interval, side=exc.side) from exc


def energy(sol, t1, t2, quad=None):
    """Energy functional ``H(t1, t2)`` of a constructed or analytic solution."""
    quad = QuadratureConfig() if quad is None else quad
    times = {1: float(t1), 2: float(t2)}
    for k in (1, 2):
        _check_domain(sol, k, times[k])
    kinetic = potential = interaction = 0.0
    for i in (1, 2):
        j = 3 - i
        A, B = sol.line(i), sol.line(j)
        ti, tj = times[i], times[j]
        m = A.charge.mass
        p = A.momentum(ti)
        kinetic += math.sqrt(p @ p + m * m)
        coupling = A.charge.charge * B.charge.charge
        qi = A.position(ti)
        for sign in (1, -1):
            d = _delay(B, ti, qi, sign, f"partner image of t{i}")
            potential += 0.5 * coupling / d.separation
            upper = _delay(A, tj, B.position(tj), -sign, f"upper limit on charge {i}").t_delayed

            def integrand(s, A=A, B=B, sign=sign):
                q, v = A.eval(s, 1)
                dd = delay_time(B, s, q, sign)
                return coulomb_force(dd.direction * dd.separation) @ v

            val, _ = adaptive_gauss(integrand, ti, upper, quad)
            interaction += 0.5 * coupling * val
    return EnergyBreakdown(float(kinetic), float(potential), float(interaction),
                           float(kinetic + potential + interaction))


@dataclass(frozen=True)
class DriftReport:
    reference: tuple
    rows: tuple  # (t1, t2, kinetic, potential, interaction, total)
    max_relative_drift: float
    mean_relative_drift: float
    skipped: tuple = ()

    def to_dict(self):
        return {
            "reference": list(self.reference),
            "max_relative_drift": self.max_relative_drift,
            "mean_relative_drift": self.mean_relative_drift,
            "rows": [list(r) for r in self.rows],
            "skipped": [list(s) for s in self.skipped],
        }

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    def to_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["t1", "t2", "kinetic", "potential", "interaction", "total"])
        for r in self.rows:
            w.writerow([fmt(x) for x in r])
        return buf.getvalue()


def fmt(x):
    """17 significant digits: enough to round-trip any double."""
    return f"{float(x):.17g}"


def _try_energy(args):
    sol, t1, t2, quad = args
    try:
        return energy(sol, t1, t2, quad)
    except OutOfDomain:
        return None


def energy_drift(sol, grid_1, grid_2, quad=None):
    """Relative drift of ``H`` over the product grid, against the first admissible pair."""
    quad = QuadratureConfig() if quad is None else quad
    pairs = [(float(a), float(b)) for a in grid_1 for b in grid_2]
    jobs = [(sol, a, b, quad) for a, b in pairs]
    n = worker_count()
    if n > 1:
        with ThreadPoolExecutor(max_workers=n) as ex:
            results = list(ex.map(_try_energy, jobs))
    else:
        results = [_try_energy(j) for j in jobs]
    rows, skipped = [], []
    for (a, b), e in zip(pairs, results):
        if e is None:
            skipped.append((a, b))
        else:
            rows.append((a, b, e.kinetic, e.potential, e.interaction_integral, e.total))
    if not rows:
        raise OutOfDomain("no admissible (t1, t2) pair in the grid")
    h0 = rows[0][5]
    drifts = [abs(r[5] - h0) / abs(h0) for r in rows]
    return DriftReport(rows[0][:2], tuple(rows), float(max(drifts)), float(np.mean(drifts)),
                       tuple(skipped))
