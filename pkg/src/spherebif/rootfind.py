"""Bracketed scalar root finding (Brent's method)."""

from __future__ import annotations

import math
import sys

EPS = sys.float_info.epsilon


class RootFindingError(RuntimeError):
    pass


def brentq(f, a, b, xtol=1e-12, maxiter=200):
    """Find a root of ``f`` in ``[a, b]`` where ``f(a)`` and ``f(b)`` differ in sign.

    Bisection safeguarded with secant / inverse-quadratic interpolation steps.
    Returns ``(root, lo, hi)`` where ``[lo, hi]`` is the final sign-changing
    bracket, of width at most ``max(xtol, 4 * eps * |root|)``.
    """
    fa = f(a)
    fb = f(b)
    if fa == 0.0:
        return a, a, a
    if fb == 0.0:
        return b, b, b
    if math.copysign(1.0, fa) == math.copysign(1.0, fb):
        raise RootFindingError(f"root not bracketed: f({a})={fa}, f({b})={fb}")

    c, fc = a, fa
    d = e = b - a
    for _ in range(maxiter):
        if math.copysign(1.0, fb) == math.copysign(1.0, fc):
            c, fc = a, fa
            d = e = b - a
        if abs(fc) < abs(fb):
            a, b, c = b, c, b
            fa, fb, fc = fb, fc, fb
        tol = max(0.5 * xtol, 2.0 * EPS * abs(b))
        m = 0.5 * (c - b)
        if abs(m) <= tol or fb == 0.0:
            lo, hi = (b, c) if b < c else (c, b)
            return b, lo, hi
        if abs(e) >= tol and abs(fa) > abs(fb):
            s = fb / fa
            if a == c:
                p = 2.0 * m * s
                q = 1.0 - s
            else:
                q = fa / fc
                r = fb / fc
                p = s * (2.0 * m * q * (q - r) - (b - a) * (r - 1.0))
                q = (q - 1.0) * (r - 1.0) * (s - 1.0)
            if p > 0:
                q = -q
            else:
                p = -p
            if 2.0 * p < min(3.0 * m * q - abs(tol * q), abs(e * q)):
                e, d = d, p / q
            else:
                d = e = m
        else:
            d = e = m
        a, fa = b, fb
        b += d if abs(d) > tol else math.copysign(tol, m)
        fb = f(b)
    raise RootFindingError(f"brentq did not converge in {maxiter} iterations")
