"""Extended-precision kernel for the method-of-steps pipeline.

Each construction step differentiates the partner worldline twice before
feeding it through the inverse force map, so rounding noise in node values
would be amplified by roughly ``D**4`` per step.  The step pipeline (node
evaluation, light-cone solves, inversion, reparameterization and the final
interpolation) therefore runs in MPFR arithmetic (``gmpy2``) at ``dps``
decimal digits.
Stored coefficients stay double precision: rounding each coefficient
perturbs it only relative to its own size, which leaves the high-order
derivatives of the represented function accurate.
"""
import math
from contextlib import contextmanager

import gmpy2
from gmpy2 import mpfr as mpf

from .errors import InternalInvariantViolation, OutOfDomain

DEFAULT_DPS = 50


@contextmanager
def workdps(dps):
    """Run the enclosed block at ``dps`` decimal digits."""
    with gmpy2.context(gmpy2.get_context(), precision=int(math.ceil(dps * 3.33)) + 8) as ctx:
        yield ctx


def _eps():
    return mpf(2) ** (-gmpy2.get_context().precision + 16)


def cheb_nodes(a, b, n):
    """Ascending Chebyshev points of the second kind on ``[a, b]`` (mp)."""
    if n == 1:
        return [(a + b) / 2]
    half, mid = (b - a) / 2, (a + b) / 2
    out = [mid - half * gmpy2.cos(gmpy2.const_pi() * k / (n - 1)) for k in range(n)]
    out[0], out[-1] = a, b
    return out


def cheb_coeffs(values):
    """Interpolation coefficients from values at :func:`cheb_nodes` (ascending)."""
    n = len(values) - 1
    # ascending node k sits at angle pi*(n-k)/n
    cos_tab = [gmpy2.cos(gmpy2.const_pi() * m / n) for m in range(2 * n)]
    out = []
    for j in range(n + 1):
        s = mpf(0)
        for k, v in enumerate(values):
            w = mpf(1) / 2 if k in (0, n) else 1
            s += w * v * cos_tab[(j * (n - k)) % (2 * n)]
        c = 2 * s / n
        if j in (0, n):
            c /= 2
        out.append(c)
    return out


def cheb_der(c, scale):
    """Coefficients of the derivative (times ``scale``)."""
    n = len(c) - 1
    if n == 0:
        return [mpf(0)]
    d = [mpf(0)] * (n + 1)
    for j in range(n, 0, -1):
        d[j - 1] = d[j + 1] + 2 * j * c[j] if j + 1 <= n else 2 * j * c[j]
    d[0] /= 2
    return [x * scale for x in d[:n]]


def clenshaw(c, x):
    b1 = b2 = mpf(0)
    x2 = 2 * x
    for ck in reversed(c[1:]):
        b1, b2 = x2 * b1 - b2 + ck, b1
    return x * b1 - b2 + c[0]


class PreciseSegment:
    def __init__(self, seg, max_order=3):
        self.a, self.b = mpf(seg.a), mpf(seg.b)
        self.rank = seg.rank
        scale = 2 / (self.b - self.a)
        self.tables = []
        for comp in range(3):
            c = [mpf(float(x)) for x in seg.coeffs[comp]]
            tabs = [c]
            for _ in range(max_order):
                tabs.append(cheb_der(tabs[-1], scale))
            self.tables.append(tabs)

    def full_tables(self, comp):
        """Derivative tables of every order (the last one is constant)."""
        tabs = self.tables[comp]
        scale = 2 / (self.b - self.a)
        while len(tabs[-1]) > 1:
            tabs.append(cheb_der(tabs[-1], scale))
        return tabs

    def eval(self, t, order):
        x = (2 * t - self.a - self.b) / (self.b - self.a)
        if order >= len(self.tables[0]):
            for c in range(3):
                self.full_tables(c)
        return [[clenshaw(self.tables[c][k], x) if k < len(self.tables[c]) else mpf(0)
                 for c in range(3)] for k in range(order + 1)]


class PreciseLine:
    """Read-only extended-precision view of a :class:`WorldLine`."""

    def __init__(self, line, cache=None):
        self.line = line
        self.mass = mpf(line.charge.mass)
        cache = {} if cache is None else cache
        self.segments = []
        for s in line.segments:
            key = id(s)
            if key not in cache:
                cache[key] = (s, PreciseSegment(s))
            self.segments.append(cache[key][1])
        self.t_lo, self.t_hi = self.segments[0].a, self.segments[-1].b

    def eval(self, t, order=0, slack=0):
        if t < self.t_lo - slack or t > self.t_hi + slack:
            raise OutOfDomain(f"t={float(t)} outside [{float(self.t_lo)}, {float(self.t_hi)}]",
                              interval=(float(self.t_lo), float(self.t_hi)))
        k = self.line.segment_index(min(max(float(t), self.line.t_lo), self.line.t_hi))
        return self.segments[k].eval(t, order)


class PinnedLine:
    """View that evaluates on one fixed segment wherever it reaches.

    Light-cone windows line up with single pieces, but the window ends sit on
    joins where the worldline lookup would hand them to the neighbouring
    piece.  Mixing pieces inside one window leaves round-off kinks in the
    samples, and those are amplified by every later step.
    """

    def __init__(self, line, t_mid, reach=1e-9):
        self.line, self.mass = line, line.mass
        self.t_lo, self.t_hi = line.t_lo, line.t_hi
        self.k = line.line.segment_index(float(t_mid))
        seg = line.segments[self.k]
        self.reach = mpf(reach) * (1 + abs(seg.a) + abs(seg.b))
        self.seg = seg

    def eval(self, t, order=0, slack=0):
        if self.seg.a - self.reach <= t <= self.seg.b + self.reach:
            return self.seg.eval(t, order)
        return self.line.eval(t, order, slack)


def norm(v):
    return gmpy2.sqrt(v[0] ** 2 + v[1] ** 2 + v[2] ** 2)


def dot(u, v):
    return u[0] * v[0] + u[1] * v[1] + u[2] * v[2]


def sub(u, v):
    return [u[0] - v[0], u[1] - v[1], u[2] - v[2]]


def scale(s, v):
    return [s * v[0], s * v[1], s * v[2]]


def force(x):
    r = norm(x)
    return scale(1 / r**3, x)


def inverse_force(y):
    r = norm(y)
    return scale(1 / r ** mpf(1.5), y)


def momentum_rate(v, a, m):
    g = 1 / gmpy2.sqrt(1 - dot(v, v))
    va = dot(v, a)
    return [m * (g * a[c] + g**3 * va * v[c]) for c in range(3)]


def polish_delay(line, t, x, sign, s0, max_iter=12):
    """Newton polish of ``s = t + sign |x - q(s)|`` from a double-precision root.

    A root sitting on a segment join can fall into the round-off gap between
    the two pieces; the best iterate is then accepted if its residual is at
    double-precision level.
    """
    s = mpf(s0)
    tol = _eps()
    slack = mpf(1e-9) * (1 + abs(t))
    best = None
    for _ in range(max_iter):
        q, v = line.eval(s, 1, slack)
        d = sub(x, q)
        r = norm(d)
        g = s - t - sign * r
        if best is None or abs(g) < best[0]:
            best = (abs(g), s)
        dg = 1 + sign * dot(d, v) / r
        step = g / dg
        s -= step
        if abs(step) <= tol * (1 + abs(s)):
            q = line.eval(s, 0, slack)[0]
            return s, sub(x, q)
    if best[0] <= mpf(1e-13) * (1 + abs(t)):
        s = best[1]
        return s, sub(x, line.eval(s, 0, slack)[0])
    raise InternalInvariantViolation("extended-precision delay polish did not converge")


def polish_root(coeffs, dcoeffs, x0, target, max_iter=12):
    """Newton polish of ``p(x) = target`` on [-1, 1] for a Chebyshev series."""
    x = mpf(x0)
    tol = _eps()
    for _ in range(max_iter):
        step = (clenshaw(coeffs, x) - target) / clenshaw(dcoeffs, x)
        x -= step
        if abs(step) <= tol:
            return x
    raise InternalInvariantViolation("extended-precision root polish did not converge")


def segment_coeffs(f, a, b, degree):
    """Chebyshev coefficients (floats, shape ``(3, degree + 1)``) of ``f`` on ``[a, b]``.

    ``f`` maps an ``mpf`` time to three ``mpf`` components; evaluation and
    interpolation run at the current working precision.
    """
    ts = cheb_nodes(mpf(a), mpf(b), degree + 1)
    vals = [f(t) for t in ts]
    return [[float(c) for c in cheb_coeffs([v[k] for v in vals])] for k in range(3)]
