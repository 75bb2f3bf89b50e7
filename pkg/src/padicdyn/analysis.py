"""Verification and invariant extraction for locally scaling maps.

Certifying a scaling class means checking the exact norm equality
||f(x)-f(y)|| = p^m ||x-y|| on pairs at every certifiable distance stratum;
expansivity means watching distinct truncations separate beyond p^-k under
iteration.  Both run exhaustively at desk scale and by seeded stratified
sampling above it, and both report witnesses rather than booleans alone.

Fixed points are counted by the seed-constraint argument, not root finding:
a fixed point is determined by its first k digits (the seed); the l head
constraints select the admissible seeds, and bijectivity on the last
variable extends each admissible seed digit by digit, uniquely.  The count
is therefore exact, and for shift powers, T_j and R it can be compared with
the closed forms from the conjugacy-class counting argument.
"""

from __future__ import annotations

import random
from dataclasses import dataclass

from .core import PadicError, PNorm, PrecisionError, Prime, ZpApprox, distance
from .maps import (
    DigitFunctionTable,
    IterateTable,
    MapSpec,
    Rmap,
    ScalingClass,
    ShiftPower,
    TableMap,
    Tj,
    _decode,
    _encode,
    iterate_table,
    table_from_spec,
)


def _eval_fn(map_like):
    if isinstance(map_like, DigitFunctionTable):
        return map_like.eval
    if isinstance(map_like, IterateTable):
        return map_like.table.eval
    if isinstance(map_like, MapSpec):
        return map_like.apply
    raise TypeError(f"not a map: {map_like!r}")


def _prime_of(map_like) -> Prime:
    if isinstance(map_like, (DigitFunctionTable,)):
        return map_like.prime
    if isinstance(map_like, IterateTable):
        return map_like.table.prime
    return map_like.prime


@dataclass(frozen=True)
class ScalingReport:
    klass: ScalingClass
    verified: bool
    witness: tuple | None  # (x digits, y digits, expected exponent, got PNorm)
    pairs_checked: int
    mode: str  # "exhaustive" | "stratified"

    def as_dict(self, p: int) -> dict:
        d = {
            "k": self.klass.k,
            "m": self.klass.m,
            "verified": self.verified,
            "pairs_checked": self.pairs_checked,
            "mode": self.mode,
        }
        if self.witness is not None:
            x, y, expect, got = self.witness
            d["witness"] = {
                "x": list(x),
                "y": list(y),
                "expected_exponent": expect,
                "got": got.describe(p),
            }
        return d


def _val_p(n: int, p: int) -> int:
    v = 0
    while n % p == 0:
        n //= p
        v += 1
    return v


def verify_scaling(map_like, klass: ScalingClass, precision: int, *,
                   exhaustive_limit: int = 4096, per_stratum: int = 512,
                   seed: int = 0) -> ScalingReport:
    """Check ||f(x)-f(y)|| = p^m ||x-y|| on pairs with distance p^-j, j in [k, N-m).

    Exhaustive over all pairs of N-digit truncations when p^N is small,
    otherwise ``per_stratum`` seeded random pairs per distance stratum.
    The first violating pair is returned as a witness.
    """
    p = _prime_of(map_like)
    f = _eval_fn(map_like)
    k, m = klass.k, klass.m
    N = precision
    if N < k + m + 1:
        raise PrecisionError(f"precision {N} < k+m+1 = {k + m + 1} certifies nothing")
    strata = range(k, N - m)

    def check_pair(xi: int, yi: int, j: int):
        fx = f(ZpApprox(p, _decode(xi, p, N)))
        fy = f(ZpApprox(p, _decode(yi, p, N)))
        got = distance(fx, fy)
        if got.exact and got.exponent == j - m:
            return None
        return (_decode(xi, p, N), _decode(yi, p, N), j - m, got)

    pairs = 0
    if p**N <= exhaustive_limit:
        mode = "exhaustive"
        values = []
        for xi in range(p**N):
            y = f(ZpApprox(p, _decode(xi, p, N)))
            values.append((y.to_int(), y.precision))
        for xi in range(p**N):
            for yi in range(xi + 1, p**N):
                j = _val_p(yi - xi, p)
                if j < k or j >= N - m:
                    continue
                pairs += 1
                (vx, nx), (vy, ny) = values[xi], values[yi]
                n_cmp = min(nx, ny)
                d = (vx - vy) % p**n_cmp
                if d == 0 or _val_p(d, p) != j - m:
                    got = PNorm(n_cmp, exact=False) if d == 0 else PNorm(_val_p(d, p))
                    return ScalingReport(
                        klass, False,
                        (_decode(xi, p, N), _decode(yi, p, N), j - m, got),
                        pairs, mode)
        return ScalingReport(klass, True, None, pairs, mode)

    mode = "stratified"
    rng = random.Random(seed)
    for j in strata:
        for _ in range(per_stratum):
            xi = rng.randrange(p**N)
            xj = (xi // p**j) % p
            yj = (xj + rng.randrange(1, p)) % p
            hi = rng.randrange(p ** (N - j - 1)) if N - j - 1 > 0 else 0
            yi = xi % p**j + yj * p**j + hi * p ** (j + 1)
            pairs += 1
            bad = check_pair(xi, yi, j)
            if bad is not None:
                return ScalingReport(klass, False, bad, pairs, mode)
    return ScalingReport(klass, True, None, pairs, mode)


@dataclass(frozen=True)
class ExpansivityReport:
    expansivity_exponent: int
    horizon: int
    pairs_checked: int
    separated: int
    undecided: tuple  # capped list of unseparated pairs (x digits, y digits)
    separation_histogram: tuple  # (n, count) sorted by n
    mode: str

    @property
    def all_separated(self) -> bool:
        return not self.undecided and self.separated == self.pairs_checked

    def as_dict(self) -> dict:
        return {
            "expansivity_exponent": self.expansivity_exponent,
            "horizon": self.horizon,
            "pairs_checked": self.pairs_checked,
            "separated": self.separated,
            "undecided": [[list(x), list(y)] for x, y in self.undecided],
            "separation_histogram": [list(t) for t in self.separation_histogram],
            "mode": self.mode,
        }


def expansivity_check(map_like, expansivity_exponent: int, horizon: int,
                      precision: int, *, exhaustive_limit: int = 256,
                      sample_pairs: int = 2048, seed: int = 0,
                      undecided_cap: int = 32) -> ExpansivityReport:
    """Find, for pairs of distinct truncations, the least n <= horizon with
    d(f^n x, f^n y) > p^-c.  Pairs still below precision at the horizon are
    reported as undecided, never silently counted as separated."""
    p = _prime_of(map_like)
    f = _eval_fn(map_like)
    N = precision
    c = expansivity_exponent

    if p**N <= exhaustive_limit:
        mode = "exhaustive"
        points = [ZpApprox(p, _decode(i, p, N)) for i in range(p**N)]
        pair_list = [(a, b) for a in range(len(points)) for b in range(a + 1, len(points))]
    else:
        mode = "sampled"
        rng = random.Random(seed)
        points = []
        pair_list = []
        for _ in range(sample_pairs):
            xi = rng.randrange(p**N)
            yi = rng.randrange(p**N)
            if xi == yi:
                yi = (yi + 1 + rng.randrange(p**N - 1)) % p**N
            points.append(ZpApprox(p, _decode(xi, p, N)))
            points.append(ZpApprox(p, _decode(yi, p, N)))
            pair_list.append((len(points) - 2, len(points) - 1))

    # orbit levels; evaluation stops for a point once precision is exhausted
    levels = [points]
    for _ in range(horizon):
        nxt = []
        for v in levels[-1]:
            if v is None:
                nxt.append(None)
                continue
            try:
                nxt.append(f(v))
            except PadicError:
                nxt.append(None)
        levels.append(nxt)

    separated = 0
    histogram: dict[int, int] = {}
    undecided = []
    for a, b in pair_list:
        hit = None
        for n in range(horizon + 1):
            xa, xb = levels[n][a], levels[n][b]
            if xa is None or xb is None:
                break
            if distance(xa, xb).gt_pow(c):
                hit = n
                break
        if hit is None:
            if len(undecided) < undecided_cap:
                undecided.append((points[a].digits, points[b].digits))
        else:
            separated += 1
            histogram[hit] = histogram.get(hit, 0) + 1
    return ExpansivityReport(
        expansivity_exponent=c,
        horizon=horizon,
        pairs_checked=len(pair_list),
        separated=separated,
        undecided=tuple(undecided),
        separation_histogram=tuple(sorted(histogram.items())),
        mode=mode,
    )


def closed_form_fixed_points(spec, iterate_n: int = 1) -> int | None:
    """Closed-form predictions for the classical maps: p^m for S^m,
    p^(m+j) for T_j, and p^(m-1)(p-1) + p^(m+1) for R (iterate 1 only for
    T_j/R).  The R form is the traditional prediction; exhaustive counting
    gives p^(m-1)(p-1) + p^m, so reports carry both for comparison."""
    if isinstance(spec, ShiftPower):
        return int(spec.prime) ** (spec.m * iterate_n)
    if iterate_n != 1:
        return None
    if isinstance(spec, Tj):
        return int(spec.prime) ** (spec.m + spec.j)
    if isinstance(spec, Rmap):
        p, m = int(spec.prime), spec.m
        return p ** (m - 1) * (p - 1) + p ** (m + 1)
    return None


@dataclass(frozen=True)
class FixedPointReport:
    map_id: str
    iterate_n: int
    klass: ScalingClass
    count: int
    seeds: tuple  # admissible seeds in A^k
    points: tuple  # each seed extended to working precision (ZpApprox)
    closed_form: int | None  # the classical closed-form prediction, when one exists

    def as_dict(self, p: int) -> dict:
        return {
            "map": self.map_id,
            "iterate": self.iterate_n,
            "k": self.klass.k,
            "m": self.klass.m,
            "count": self.count,
            "closed_form": self.closed_form,
            "matches_closed_form": (None if self.closed_form is None
                                    else self.count == self.closed_form),
            "seeds": [list(s) for s in self.seeds],
            "points": [str(pt) for pt in self.points],
        }


def _resolve_table(map_like, depth_hint: int):
    if isinstance(map_like, DigitFunctionTable):
        return map_like, repr(map_like.klass), None
    if isinstance(map_like, IterateTable):
        return map_like.table, f"iterate({map_like.n})", None
    if isinstance(map_like, MapSpec):
        table = (map_like.table if isinstance(map_like, TableMap)
                 else table_from_spec(map_like, depth=depth_hint))
        return table, map_like.__class__.__name__, map_like
    raise TypeError(f"not a map: {map_like!r}")


def fixed_points(map_like, *, precision: int = 12) -> FixedPointReport:
    """Exact fixed points of a table map via seed enumeration.

    Seeds are the p^k tuples (x_0..x_{k-1}); a seed is admissible when it
    satisfies the l head constraints x_i = f_i(seed).  Each admissible seed
    extends uniquely: for i >= l the constraint x_i = f_i(x_0..x_{k-l+i})
    determines the digit x_{k-l+i} by bijectivity on the last variable.
    """
    table, map_id, spec = _resolve_table(map_like, depth_hint=precision)
    p = table.prime
    k, m, l = table.klass.k, table.klass.m, table.klass.l
    seeds = []
    points = []
    for idx in range(p**k):
        digs = _decode(idx, p, k)
        if any(table.digit_value(i, idx) != digs[i] for i in range(l)):
            continue
        seeds.append(digs)
        ext = list(digs)
        i = l
        base = _encode(ext, p)
        pw = p**k
        while len(ext) < precision and table.has_digit(i):
            matches = [c for c in range(p)
                       if table.digit_value(i, base + c * pw) == ext[i]]
            if len(matches) != 1:
                raise PadicError(
                    f"tail extension failed at digit {i} for seed {digs}: "
                    f"{len(matches)} candidates (corrupt table)"
                )
            ext.append(matches[0])
            base += matches[0] * pw
            pw *= p
            i += 1
        points.append(ZpApprox(p, tuple(ext)))
    closed = closed_form_fixed_points(spec) if spec is not None else None
    return FixedPointReport(
        map_id=map_id,
        iterate_n=1,
        klass=table.klass,
        count=len(seeds),
        seeds=tuple(seeds),
        points=tuple(points),
        closed_form=closed,
    )


def periodic_points(map_like, n: int, *, precision: int = 12) -> FixedPointReport:
    """Points of period dividing n: fixed points of the realized n-th iterate.

    These counts are conjugacy invariants and are what separates scaling
    classes that share every fixed-point count.
    """
    if n < 1:
        raise ValueError("period must be >= 1")
    table, map_id, spec = _resolve_table(map_like, depth_hint=precision)
    if n == 1:
        report = fixed_points(map_like, precision=precision)
        return report
    m, l = table.klass.m, table.klass.l
    depth = max(l + 1, precision - n * m, 1)
    it = iterate_table(table, n, depth)
    report = fixed_points(it, precision=precision)
    closed = closed_form_fixed_points(spec, iterate_n=n) if spec is not None else None
    return FixedPointReport(
        map_id=f"{map_id}^({n})",
        iterate_n=n,
        klass=it.table.klass,
        count=report.count,
        seeds=report.seeds,
        points=report.points,
        closed_form=closed,
    )


@dataclass(frozen=True)
class ShadowingModulus:
    """Guaranteed (epsilon, delta) exponent pairing for a scaling class.

    For epsilon = p^-(k+s) a shadow exists for every pseudo-orbit at
    delta = p^-(l+s) when m < k, and at delta = p^-(k+s) when m = k.
    """

    klass: ScalingClass

    def epsilon_exponent(self, s: int) -> int:
        return self.klass.k + s

    def delta_exponent(self, s: int) -> int:
        if self.klass.m == self.klass.k:
            return self.klass.k + s
        return self.klass.l + s

    def as_dict(self) -> dict:
        return {
            "k": self.klass.k,
            "m": self.klass.m,
            "pairs": [
                {"s": s,
                 "epsilon_exponent": self.epsilon_exponent(s),
                 "delta_exponent": self.delta_exponent(s)}
                for s in range(4)
            ],
        }


def shadowing_modulus_bound(klass: ScalingClass) -> ShadowingModulus:
    return ShadowingModulus(klass)
