"""Truncated Taylor series ("jets") in extended precision.

A scalar jet of order ``N`` is a list ``[a_0, ..., a_N]`` of Taylor
coefficients ``a_k = f^(k)(t0) / k!``; a vector jet is a list of three scalar
jets.  Used to evaluate the compatibility conditions of strip initial data
to any finite order and to generate strips that satisfy them.
"""
from .errors import InternalInvariantViolation, SingularSeparation
from .precise import _eps, clenshaw, mpf


def const(c, n):
    return [mpf(c)] + [mpf(0)] * n


def ident(t0, n):
    """The jet of ``t -> t`` at ``t0``."""
    out = const(t0, n)
    if n >= 1:
        out[1] = mpf(1)
    return out


def order(a):
    return len(a) - 1


def add(a, b):
    return [x + y for x, y in zip(a, b)]


def sub(a, b):
    return [x - y for x, y in zip(a, b)]


def scale(c, a):
    return [c * x for x in a]


def mul(a, b):
    n = min(order(a), order(b))
    return [sum(a[j] * b[k - j] for j in range(k + 1)) for k in range(n + 1)]


def recip(a):
    if a[0] == 0:
        raise SingularSeparation("reciprocal of a jet with zero constant term")
    out = [1 / a[0]]
    for k in range(1, len(a)):
        out.append(-sum(a[j] * out[k - j] for j in range(1, k + 1)) / a[0])
    return out


def div(a, b):
    return mul(a, recip(b))


def power(a, alpha):
    """``a ** alpha`` for a jet with positive constant term."""
    if not a[0] > 0:
        raise SingularSeparation("fractional power of a jet with non-positive constant term")
    alpha = mpf(alpha)
    out = [a[0] ** alpha]
    for k in range(1, len(a)):
        s = sum((alpha * j - (k - j)) * a[j] * out[k - j] for j in range(1, k + 1))
        out.append(s / (k * a[0]))
    return out


def deriv(a):
    """Jet of ``f'`` (one order shorter)."""
    return [k * a[k] for k in range(1, len(a))] or [mpf(0)]


def integ(a, c0):
    """Jet of the antiderivative with value ``c0`` at the base point."""
    return [mpf(c0)] + [a[k] / (k + 1) for k in range(len(a))]


def truncate(a, n):
    return (a + [mpf(0)] * (n + 1 - len(a)))[: n + 1]


def compose(f, s, base=None):
    """``f(s(t))`` where ``f`` is a jet at ``base`` (default ``s[0]``) and ``s`` a jet in ``t``.

    ``f`` is treated as the polynomial its coefficients define.
    """
    n = order(s)
    delta = [mpf(0) if base is None else s[0] - base] + s[1:]
    out = const(0, n)
    for c in reversed(f if base is not None else f[: n + 1]):
        out = mul(out, delta)
        out[0] += c
    return out


def compose_poly(f, h, n):
    """Re-centre the polynomial jet ``f`` from ``t0`` to ``t0 + h`` (orders ``0..n``)."""
    out = []
    g = list(f)
    for _ in range(n + 1):
        val = mpf(0)
        for c in reversed(g):
            val = val * h + c
        out.append(val)
        g = [k * g[k] for k in range(1, len(g))] or [mpf(0)]
        g = [c / len(out) for c in g]
    return out


# ---- vector jets -------------------------------------------------------

def vconst(v, n):
    return [const(c, n) for c in v]


def vadd(u, v):
    return [add(a, b) for a, b in zip(u, v)]


def vsub(u, v):
    return [sub(a, b) for a, b in zip(u, v)]


def vscale(c, u):
    """Scalar (number or jet) times vector jet."""
    if isinstance(c, list):
        return [mul(c, a) for a in u]
    return [scale(c, a) for a in u]


def vdot(u, v):
    out = mul(u[0], v[0])
    for a, b in zip(u[1:], v[1:]):
        out = add(out, mul(a, b))
    return out


def vderiv(u):
    return [deriv(a) for a in u]


def vinteg(u, c0):
    return [integ(a, c) for a, c in zip(u, c0)]


def vcompose(f, s, base=None):
    return [compose(a, s, base) for a in f]


def vtruncate(u, n):
    return [truncate(a, n) for a in u]


def vnorm(u):
    return power(vdot(u, u), mpf(1) / 2)


def force(x):
    """Jet of ``F(x) = x / |x|^3``."""
    return vscale(power(vdot(x, x), mpf(-3) / 2), x)


def inverse_force(y):
    """Jet of ``I(y) = y / |y|^(3/2)``."""
    return vscale(power(vdot(y, y), mpf(-3) / 4), y)


def momentum(v, m):
    """Jet of ``m v / sqrt(1 - v^2)``."""
    one = const(1, order(v[0]))
    return vscale(scale(mpf(m), power(sub(one, vdot(v, v)), mpf(-1) / 2)), v)


def velocity(p, m):
    """Jet of ``p / sqrt(m^2 + p^2)``."""
    m2 = const(mpf(m) ** 2, order(p[0]))
    return vscale(power(add(m2, vdot(p, p)), mpf(-1) / 2), p)


def vvalue(u):
    return [a[0] for a in u]


# ---- sources: anything that yields position jets at a base time ----------

class SegmentSource:
    """Position jets of a polynomial segment (exact derivatives)."""

    def __init__(self, pseg):
        self.pseg = pseg

    def jet(self, s0, n):
        out = []
        x = (2 * s0 - self.pseg.a - self.pseg.b) / (self.pseg.b - self.pseg.a)
        for comp in range(3):
            tabs = self.pseg.full_tables(comp)
            coeffs, fact = [], mpf(1)
            for k in range(n + 1):
                if k > 0:
                    fact *= k
                coeffs.append(clenshaw(tabs[k], x) / fact if k < len(tabs) else mpf(0))
            out.append(coeffs)
        return out


class JetSource:
    """Position jets re-centred from a known jet at ``t0``."""

    def __init__(self, t0, jet):
        self.t0, self.base = mpf(t0), jet

    def jet(self, s0, n):
        h = s0 - self.t0
        return [compose_poly(a, h, n) for a in self.base]


def delay_series(source, x, sign, s0, max_iter=60):
    """Jet of the light-cone time ``s(t) = t + sign |x(t) - q(s(t))|``.

    ``x = (t_jet, x_jet)`` gives the identity jet at the base time and the
    field-point jet; ``s0`` is the already-solved root at the base time.
    Newton iteration in jet space doubles the number of correct orders per
    pass.  Returns the delay jet and the separation jet ``x - q(s)``.
    """
    t_jet, xq = x
    n = order(t_jet)
    qj = source.jet(s0, n + 1)
    vj = vderiv(qj)
    s = const(s0, n)
    tol = _eps() * 1e3
    for _ in range(max_iter):
        q = vcompose(qj, s, s0)
        v = vcompose(vj, s, s0)
        d = vsub(xq, q)
        r = vnorm(d)
        g = sub(sub(s, t_jet), scale(sign, r))
        dg = add(const(1, n), scale(sign, div(vdot(d, v), r)))
        step = div(g, dg)
        s = sub(s, step)
        if max(abs(c) for c in step) <= tol * (1 + max(abs(c) for c in s)):
            return s, vsub(xq, vcompose(qj, s, s0))
    raise InternalInvariantViolation("jet delay iteration did not converge")


def revert(tau, t0, n, max_iter=60):
    """Inverse series: jet of ``t(tau)`` at ``tau[0]`` for an increasing jet ``tau(t)``."""
    if not tau[1] > 0:
        raise InternalInvariantViolation("cannot revert a non-increasing series")
    target = ident(tau[0], n)
    dtau = deriv(tau)
    t = ident(t0, n)
    t[1] = 1 / tau[1]
    tol = _eps() * 1e3
    for _ in range(max_iter):
        r = sub(compose(tau, t, t0), target)
        step = div(r, compose(dtau, t, t0))
        t = sub(t, step)
        if max(abs(c) for c in step) <= tol * (1 + max(abs(c) for c in t)):
            return t
    raise InternalInvariantViolation("series reversion did not converge")


def taylor_to_derivs(a):
    """Derivatives ``f^(k)(t0)`` from Taylor coefficients."""
    out, fact = [], mpf(1)
    for k, c in enumerate(a):
        if k > 0:
            fact *= k
        out.append(c * fact)
    return out
