"""Brute-force oracles for small prime and precision.

Everything here is deliberately dumb: exhaustive enumeration of residues
mod p^N using plain integers and direct map evaluation, with none of the
seed-constraint or digit-solving machinery it is used to check.
"""

from __future__ import annotations

from .core import PadicError, ZpApprox
from .maps import DigitFunctionTable, IterateTable, MapSpec, _decode


def _eval(map_like, x: ZpApprox) -> ZpApprox:
    if isinstance(map_like, DigitFunctionTable):
        return map_like.eval(x)
    if isinstance(map_like, IterateTable):
        return map_like.table.eval(x)
    if isinstance(map_like, MapSpec):
        return map_like.apply(x)
    raise TypeError(f"not a map: {map_like!r}")


def brute_fixed_point_count(map_like, prime: int, precision: int) -> int:
    """Count x in Z/p^N with f(x) = x on every digit f determines.

    For a (p^-k, p^m) map each true fixed point corresponds to exactly one
    solution of this congruence (the tail digits are forced), so the count
    is the exact fixed-point count whenever N >= k.
    """
    p = prime
    count = 0
    for xi in range(p**precision):
        x = ZpApprox(p, _decode(xi, p, precision))
        y = _eval(map_like, x)
        if y.digits == x.digits[: y.precision]:
            count += 1
    return count


def brute_periodic_point_count(map_like, prime: int, n: int, precision: int) -> int:
    """Count x in Z/p^N with f^n(x) = x on every determined digit."""
    p = prime
    count = 0
    for xi in range(p**precision):
        x = ZpApprox(p, _decode(xi, p, precision))
        y = x
        try:
            for _ in range(n):
                y = _eval(map_like, y)
        except PadicError:
            raise PadicError(f"precision {precision} too small for {n} applications")
        if y.digits == x.digits[: y.precision]:
            count += 1
    return count


def brute_shadow_points(map_like, orbit_points, k: int, m: int, s: int,
                        precision: int) -> list:
    """All y in Z/p^N whose orbit matches the pseudo-orbit to p^-(k+s).

    A candidate matches when digits 0..k+s-1 of f^n(y) equal those of the
    n-th orbit point, for every n at which the candidate's precision still
    determines those digits.  Returns the matching residues as integers.
    """
    p = orbit_points[0].prime
    want = k + s
    out = []
    for yi in range(p**precision):
        y = ZpApprox(p, _decode(yi, p, precision))
        ok = True
        cur = y
        for x_n in orbit_points:
            if cur.precision < want:
                break
            if cur.digits[:want] != x_n.digits[:want]:
                ok = False
                break
            if cur.precision - m < want:
                break
            cur = _eval(map_like, cur)
        if ok:
            out.append(yi)
    return out
