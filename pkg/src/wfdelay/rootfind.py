"""Bisection-safeguarded Newton iteration for scalar equations."""
import math

from .errors import InvalidArgument, InternalInvariantViolation


def safeguarded_newton(fdf, lo, hi, x0=None, xtol=1e-15, max_iter=100, f_lo=None, f_hi=None):
    """Root of ``f`` on ``[lo, hi]`` given a sign change at the ends.

    ``fdf(x)`` returns ``(f(x), f'(x))``.  A Newton step is taken when it
    stays inside the current bracket and shrinks the step at least by half;
    otherwise the bracket is bisected.  Returns ``(root, f(root))``.
    """
    if not lo <= hi:
        raise InvalidArgument(f"empty bracket [{lo}, {hi}]")
    if f_lo is None:
        f_lo = fdf(lo)[0]
    if f_hi is None:
        f_hi = fdf(hi)[0]
    if f_lo == 0.0:
        return lo, 0.0
    if f_hi == 0.0:
        return hi, 0.0
    if (f_lo > 0) == (f_hi > 0):
        raise InvalidArgument(f"root not bracketed: f({lo})={f_lo}, f({hi})={f_hi}")
    # orient so that f(neg) < 0 < f(pos)
    neg, pos = (lo, hi) if f_lo < 0 else (hi, lo)
    x = 0.5 * (lo + hi) if x0 is None or not lo <= x0 <= hi else float(x0)
    dx_old = dx = abs(hi - lo)
    f, df = fdf(x)
    for _ in range(max_iter):
        if f == 0.0:
            return x, f
        if f < 0:
            neg = x
        else:
            pos = x
        newton_ok = (
            df != 0.0
            and math.isfinite(df)
            and ((x - neg) * df - f) * ((x - pos) * df - f) < 0.0
            and abs(2.0 * f) <= abs(dx_old * df)
        )
        dx_old = dx
        if newton_ok:
            dx = f / df
            x_new = x - dx
        else:
            x_new = 0.5 * (neg + pos)
            dx = x - x_new
        if abs(dx) <= xtol * (1.0 + abs(x_new)) or x_new == x:
            x = x_new
            f, df = fdf(x)
            return x, f
        x = x_new
        f, df = fdf(x)
    raise InternalInvariantViolation(f"safeguarded Newton did not converge in {max_iter} steps")
