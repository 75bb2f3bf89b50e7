"""Pseudo-orbit generation and the four shadowing constructions.

A delta-pseudo-orbit stores its points together with the exact residuals
w_n = x_{n+1} - f(x_n); its certified delta is the honest maximum of the
residual norms, recomputable from the points at any time.

Solvers:

* ``shadow_locally_scaling`` -- the recursive digit construction for a
  (p^-k, p^m) table map.  With epsilon = p^-(k+s) and delta = p^-(l+s)
  (delta = p^-(k+s) when m = k), the shadow point y starts as the first
  k+s digits of x_0; step n then forces digits l+s..k+s-1 of f^n(y) to
  match the n-th orbit point, which pins down the next k-l digits of y,
  one at a time, through the bijectivity of the digit functions on their
  last variable.  The solver never materializes the iterate tower; it
  maintains f^j(y) lazily as digit streams and back-substitutes one digit
  at a time, asserting the proof's progress index (y determined through
  nk-(n-1)l+s-1 after step n) at every step.

* ``shadow_lipschitz`` -- a 1-Lipschitz map is shadowed by x_0 itself;
  the certification method for the Lipschitz bound is recorded.

* ``shadow_affine_qp`` -- for f(z) = az + b on Q_p the shadow is explicit:
  x = x_0 + sum a^-i w_{i-1} when ||a|| > 1, the mirrored series through
  f^-1 on the backward residuals when ||a|| < 1 (the reader-completed
  branch), and x_0 itself when ||a|| = 1.

* ``shadow_dilatation`` -- for a certified expansion by p^k, iterate the
  sequence-space contraction Phi((y_n)) = (g^-1(x_{n+1}+y_{n+1}) - x_n)
  from the zero sequence; each sweep contracts corrections by p^-k, and
  the fixed point's 0-entry corrects x_0 into a true orbit.
"""

from __future__ import annotations

import random
import re
from dataclasses import dataclass, field

from .core import (
    PadicError,
    PNorm,
    PrecisionError,
    Prime,
    QpApprox,
    ZpApprox,
    distance,
    encode_value,
    inverse_unit,
    parse_value,
    pnorm_max,
)
from .maps import (
    AffineQp,
    AffineZp,
    Compose,
    DigitFunctionTable,
    GaModZp,
    MahlerMap,
    MapSpec,
    Substitution,
)
from .mahler import one_lipschitz_report


class ConstraintUnsolvable(PadicError):
    """A solve step found no admissible digit: either the orbit's certified
    delta is violated or the table lacks bijectivity."""

    def __init__(self, step: int, digit_index: int, reason: str):
        self.step = step
        self.digit_index = digit_index
        super().__init__(f"step {step}, output digit {digit_index}: {reason}")


class CertificationError(PadicError):
    """A certified map property (Lipschitz bound, expansion constant) was
    contradicted by exact recomputation; the witness is in the message."""


def _apply(map_like, x):
    if isinstance(map_like, DigitFunctionTable):
        return map_like.eval(x)
    return map_like.apply(x)


@dataclass(frozen=True)
class PseudoOrbit:
    """A finite pseudo-orbit with exact residuals.

    ``points[i]`` is x_{start_index + i}; ``residuals[i]`` is
    w_{start_index + i} = x_{start_index + i + 1} - f(x_{start_index + i}).
    """

    points: tuple
    residuals: tuple
    start_index: int = 0

    def __post_init__(self):
        object.__setattr__(self, "points", tuple(self.points))
        object.__setattr__(self, "residuals", tuple(self.residuals))
        if len(self.points) < 2:
            raise ValueError("a pseudo-orbit needs at least two points")
        if len(self.residuals) != len(self.points) - 1:
            raise ValueError("need exactly one residual per step")

    @classmethod
    def from_map(cls, map_like, points, start_index: int = 0) -> "PseudoOrbit":
        residuals = tuple(
            points[i + 1] - _apply(map_like, points[i]) for i in range(len(points) - 1)
        )
        return cls(tuple(points), residuals, start_index)

    @property
    def prime(self) -> Prime:
        return self.points[0].prime

    @property
    def end_index(self) -> int:
        return self.start_index + len(self.points) - 1

    @property
    def two_sided(self) -> bool:
        return self.start_index < 0

    def point(self, n: int):
        return self.points[n - self.start_index]

    def residual(self, n: int):
        return self.residuals[n - self.start_index]

    @property
    def certified_delta(self) -> PNorm:
        return pnorm_max(w.norm() for w in self.residuals)

    def validate(self, map_like) -> bool:
        """Recompute every residual from the points and compare digitwise."""
        for i in range(len(self.points) - 1):
            w = self.points[i + 1] - _apply(map_like, self.points[i])
            if w != self.residuals[i]:
                return False
        return True


def _random_zp_residual(rng, p: int, precision: int, delta_exp: int) -> ZpApprox:
    zeros = min(max(delta_exp, 0), precision)
    digits = (0,) * zeros + tuple(rng.randrange(p) for _ in range(precision - zeros))
    return ZpApprox(p, digits)


def perturb_orbit(map_like, x0: ZpApprox, delta_exponent: int, steps: int,
                  seed: int) -> PseudoOrbit:
    """x_{n+1} = f(x_n) + w_n with w_n uniform among values of norm <= p^-delta.

    Deterministic under the seed (mt19937).  Precision decays by the map's
    digit loss each step; the orbit fails with a precision error rather than
    fabricate digits when the start point is too short.
    """
    rng = random.Random(seed)
    points = [x0]
    residuals = []
    for _ in range(steps):
        fx = _apply(map_like, points[-1])
        w = _random_zp_residual(rng, fx.prime, fx.precision, delta_exponent)
        points.append(fx + w)
        residuals.append(w)
    return PseudoOrbit(tuple(points), tuple(residuals), 0)


def invert_spec(spec: MapSpec) -> MapSpec:
    """Exact inverse of an invertible Q_p spec (affine maps and compositions)."""
    if isinstance(spec, AffineQp):
        return spec.inverse_spec()
    if isinstance(spec, Compose):
        return Compose(tuple(invert_spec(part) for part in reversed(spec.parts)))
    raise PadicError(f"no exact inverse available for {type(spec).__name__}")


def _random_qp_residual(rng, p: int, delta_exp: int, width: int) -> QpApprox:
    return QpApprox(p, delta_exp, tuple(rng.randrange(p) for _ in range(width)))


def perturb_orbit_two_sided(spec: MapSpec, x0: QpApprox, delta_exponent: int,
                            back: int, forward: int, seed: int) -> PseudoOrbit:
    """Two-sided pseudo-orbit of an invertible Q_p spec.

    Forward points are f(x_n) + w_n; backward points solve
    x_{n-1} = f^-1(x_n - w_{n-1}), so the stored residuals are exact on
    both sides.
    """
    rng = random.Random(seed)
    inv = invert_spec(spec)
    width = len(x0.digits)
    fwd_points = [x0]
    for _ in range(forward):
        fx = spec.apply(fwd_points[-1])
        w = _random_qp_residual(rng, x0.prime, delta_exponent, width)
        fwd_points.append(fx + w)
    bwd_points = []
    cur = x0
    for _ in range(back):
        w = _random_qp_residual(rng, x0.prime, delta_exponent, width)
        prev = inv.apply(cur - w)
        bwd_points.append(prev)
        cur = prev
    points = tuple(reversed(bwd_points)) + tuple(fwd_points)
    # store the residuals the points themselves determine (the drawn noise
    # below a point's window is not recoverable and must not be claimed)
    return PseudoOrbit.from_map(spec, points, -back)


@dataclass(frozen=True)
class ShadowResult:
    """A shadow point with its certification.

    Every listed per-step distance is <= the achieved epsilon (their honest
    maximum); ``details`` records solver-specific certificates.
    """

    point: object
    epsilon: PNorm
    step_distances: tuple
    start_index: int
    solver: str
    details: dict = field(default_factory=dict)

    @property
    def horizon(self) -> int:
        return self.start_index + len(self.step_distances) - 1


class _DigitStream:
    """Append-only digit vector with O(1) mixed-radix prefix indices."""

    __slots__ = ("p", "digits", "cumacc", "pw")

    def __init__(self, p: int, digits=()):
        self.p = p
        self.digits = []
        self.cumacc = [0]
        self.pw = [1]
        for d in digits:
            self.append(d)

    def append(self, d: int) -> None:
        self.digits.append(d)
        self.cumacc.append(self.cumacc[-1] + d * self.pw[-1])
        self.pw.append(self.pw[-1] * self.p)

    def prefix_index(self, t: int) -> int:
        return self.cumacc[t]

    def __len__(self) -> int:
        return len(self.digits)


def _extend_stream(table: DigitFunctionTable, prev: _DigitStream,
                   cur: _DigitStream) -> None:
    """Append every digit of f(prev) that prev's digits determine."""
    k, l = table.klass.k, table.klass.l
    while True:
        i = len(cur)
        if i < l:
            if len(prev) < k:
                return
            cur.append(table.digit_value(i, prev.prefix_index(k)))
            continue
        need = k - l + i + 1
        if len(prev) < need or not table.has_digit(i):
            return
        cur.append(table.digit_value(i, prev.prefix_index(need)))


def shadow_locally_scaling(table: DigitFunctionTable, orbit: PseudoOrbit,
                           s: int = 0) -> ShadowResult:
    """The recursive digit solver for a (p^-k, p^m) table map.

    Requires the orbit certified at delta = p^-(l+s) (p^-(k+s) when m = k)
    and points with at least k+s digits; produces a shadow point verified
    at epsilon = p^-(k+s) over the whole orbit.
    """
    if orbit.two_sided:
        raise PadicError("the locally scaling solver is one-sided; got a two-sided orbit")
    if s < 0:
        raise ValueError("s must be >= 0")
    k, m, l = table.klass.k, table.klass.m, table.klass.l
    p = table.prime
    delta_exp = (l + s) if m < k else (k + s)
    if not orbit.certified_delta.leq_pow(delta_exp):
        raise PrecisionError(
            f"orbit certified at {orbit.certified_delta.describe(p)}, "
            f"need <= {p}^-{delta_exp}"
        )
    for x in orbit.points:
        if x.precision < k + s:
            raise PrecisionError(f"orbit points need at least {k + s} digits")

    T = len(orbit.points) - 1
    levels = [_DigitStream(p, orbit.points[0].digits[: k + s])]
    for n in range(1, T + 1):
        levels.append(_DigitStream(p))
        for j in range(1, n + 1):
            _extend_stream(table, levels[j - 1], levels[j])
        zn = levels[n]
        x_n = orbit.points[n]
        if len(zn) != l + s:
            raise PadicError(
                f"internal: level {n} has {len(zn)} digits, expected {l + s}"
            )
        for i in range(l + s):
            if zn.digits[i] != x_n.digits[i]:
                raise ConstraintUnsolvable(
                    n, i, "automatic digits disagree: the orbit's certified "
                    "delta is violated")
        for i in range(l + s, k + s):
            found = None
            for c in range(p):
                d = c
                for j in range(1, n + 1):
                    prev, lev = levels[j - 1], levels[j]
                    ii = len(lev)
                    idx = prev.prefix_index(len(prev)) + d * prev.pw[len(prev)]
                    if not table.has_digit(ii):
                        raise ConstraintUnsolvable(n, ii, "table depth exhausted")
                    d = table.digit_value(ii, idx)
                    if j == n and ii != i:
                        raise PadicError("internal: cascade index drift")
                if d == x_n.digits[i]:
                    if found is not None:
                        raise ConstraintUnsolvable(
                            n, i, "two admissible digits: table lacks bijectivity")
                    found = c
            if found is None:
                raise ConstraintUnsolvable(
                    n, i, "no admissible digit: certified delta violated or "
                    "table lacks bijectivity")
            levels[0].append(found)
            for j in range(1, n + 1):
                _extend_stream(table, levels[j - 1], levels[j])
        # the proof's progress invariant: y determined through (n+1)k - nl + s - 1
        if len(levels[0]) != (n + 1) * k - n * l + s:
            raise PadicError(
                f"internal: progress invariant broken at step {n}: "
                f"{len(levels[0])} digits, expected {(n + 1) * k - n * l + s}"
            )

    y = ZpApprox(p, tuple(levels[0].digits))
    dists = []
    cur = y
    for n in range(T + 1):
        d = distance(orbit.points[n], cur)
        if not d.leq_pow(k + s):
            raise PadicError(
                f"internal: solved shadow violates epsilon at step {n}: "
                f"{d.describe(p)}")
        dists.append(d)
        if n < T:
            cur = table.eval(cur)
    return ShadowResult(
        point=y,
        epsilon=pnorm_max(dists),
        step_distances=tuple(dists),
        start_index=0,
        solver="locally-scaling",
        details={"s": s, "epsilon_exponent": k + s, "delta_exponent": delta_exp},
    )


def certify_one_lipschitz(map_like, *, samples: int = 256, precision: int = 10,
                          seed: int = 0):
    """Certify that a Z_p map is 1-Lipschitz; returns the method used.

    Substitutions and affine maps are 1-Lipschitz structurally; a Mahler map
    is certified through the coefficient criterion; anything else is checked
    on seeded sample pairs.  Raises :class:`CertificationError` with a
    witness when a sampled pair certifiably expands.
    """
    if isinstance(map_like, Substitution):
        return "structural:substitution"
    if isinstance(map_like, AffineZp):
        return "structural:affine"
    if isinstance(map_like, GaModZp):
        if map_like.a.norm().exponent >= 0:
            return "structural:ga-mod-zp"
        raise CertificationError("cannot certify ||a|| <= 1: g_a may expand")
    if isinstance(map_like, MahlerMap):
        report = one_lipschitz_report(map_like.series)
        if report.passed:
            return "mahler-criterion"
        raise CertificationError(
            f"Mahler criterion violated first at n={report.first_violation}")
    if isinstance(map_like, Compose):
        for part in map_like.parts:
            certify_one_lipschitz(part, samples=samples, precision=precision, seed=seed)
        return "structural:composition"
    rng = random.Random(seed)
    p = _prime_of(map_like)
    for _ in range(samples):
        x = ZpApprox(p, tuple(rng.randrange(p) for _ in range(precision)))
        y = ZpApprox(p, tuple(rng.randrange(p) for _ in range(precision)))
        if x.digits == y.digits:
            continue
        din = distance(x, y)
        dout = distance(_apply(map_like, x), _apply(map_like, y))
        if din.exact and dout.gt_pow(din.exponent):
            raise CertificationError(
                f"pair expands: d(x,y)={din.describe(p)}, "
                f"d(fx,fy)={dout.describe(p)}, x={encode_value(x)}, y={encode_value(y)}")
    return f"sampled:{samples}"


def _prime_of(map_like) -> Prime:
    if isinstance(map_like, DigitFunctionTable):
        return map_like.prime
    return map_like.prime


def shadow_lipschitz(map_like, orbit: PseudoOrbit, *,
                     certification: str | None = None) -> ShadowResult:
    """Shadow a 1-Lipschitz map's pseudo-orbit by its own starting point.

    The induction ||x_{n+1} - f^{n+1}(x_0)|| <= max_i ||w_i|| is re-verified
    step by step; a certified violation means the Lipschitz certificate was
    wrong and is raised with the witness step.
    """
    if orbit.two_sided:
        raise PadicError("the Lipschitz shadow is one-sided; got a two-sided orbit")
    if certification is None:
        certification = certify_one_lipschitz(map_like)
    p = orbit.prime
    delta = orbit.certified_delta
    y = orbit.points[0]
    cur = y
    dists = []
    for n in range(len(orbit.points)):
        d = distance(orbit.points[n], cur)
        if d.gt_pow(delta.exponent):
            raise CertificationError(
                f"step {n} distance {d.describe(p)} exceeds certified delta "
                f"{delta.describe(p)}: the 1-Lipschitz certificate was wrong")
        dists.append(d)
        if n < len(orbit.points) - 1:
            cur = _apply(map_like, cur)
    return ShadowResult(
        point=y,
        epsilon=pnorm_max(dists),
        step_distances=tuple(dists),
        start_index=0,
        solver="lipschitz",
        details={"certification": certification,
                 "delta": delta.describe(p)},
    )


def shadow_affine_qp(a: QpApprox, b: QpApprox, orbit: PseudoOrbit) -> ShadowResult:
    """Explicit shadow for f(z) = az + b on Q_p, both directions.

    ||a|| > 1: x = x_0 + sum_{i>=1} a^-i w_{i-1} over the forward residuals.
    ||a|| < 1: x = x_0 - sum_{i>=1} a^{i-1} w_{-i} over the backward residuals
    (the mirror construction through f^-1).  ||a|| = 1: x = x_0.
    The achieved bound is verified to be <= the orbit's certified delta in
    both directions, matching the sup-of-residuals estimate.
    """
    spec = AffineQp(a, b)
    p = spec.prime
    va = a.normalize().valuation_offset
    x0 = orbit.point(0)
    fwd_last = orbit.end_index
    bwd_first = orbit.start_index

    if va < 0:
        branch = "series"
        a_inv = inverse_unit(a)
        power = a_inv
        x = x0
        for j in range(0, fwd_last):
            x = x + power * orbit.residual(j)
            power = power * a_inv
    elif va > 0:
        branch = "mirror"
        x = x0
        power = None
        for i in range(1, -bwd_first + 1):
            w = orbit.residual(-i)
            term = w if power is None else power * w
            x = x - term
            power = a if power is None else power * a
    else:
        branch = "isometry"
        x = x0

    delta = orbit.certified_delta
    inv_spec = spec.inverse_spec()
    dists = {}
    cur = x
    for n in range(0, fwd_last + 1):
        dists[n] = distance(orbit.point(n), cur)
        cur = spec.apply(cur)
    cur = x
    for n in range(-1, bwd_first - 1, -1):
        cur = inv_spec.apply(cur)
        dists[n] = distance(orbit.point(n), cur)
    ordered = tuple(dists[n] for n in range(bwd_first, fwd_last + 1))
    for n, d in zip(range(bwd_first, fwd_last + 1), ordered):
        if d.gt_pow(delta.exponent):
            raise PadicError(
                f"internal: affine shadow violates delta at step {n}: {d.describe(p)}")
    return ShadowResult(
        point=x,
        epsilon=pnorm_max(ordered),
        step_distances=ordered,
        start_index=bwd_first,
        solver="affine-qp",
        details={"branch": branch, "delta": delta.describe(p)},
    )


def certify_expansion(spec: MapSpec, *, samples: int = 128, seed: int = 0) -> int:
    """Certify an exact expansion constant p^k for a Q_p spec.

    Affine maps carry it structurally (k = -val(a)); otherwise seeded sample
    pairs must all scale by the same exact power, which is returned.
    """
    if isinstance(spec, AffineQp):
        return -spec.a.normalize().valuation_offset
    if isinstance(spec, Compose):
        return sum(certify_expansion(part, samples=samples, seed=seed)
                   for part in spec.parts)
    rng = random.Random(seed)
    p = spec.prime
    k = None
    for _ in range(samples):
        v = rng.randrange(-3, 3)
        x = QpApprox(p, v, tuple(rng.randrange(p) for _ in range(12)))
        y = QpApprox(p, v, tuple(rng.randrange(p) for _ in range(12)))
        din = distance(x, y)
        if not din.exact:
            continue
        dout = distance(spec.apply(x), spec.apply(y))
        if not dout.exact:
            continue
        scale = din.exponent - dout.exponent
        if k is None:
            k = scale
        elif k != scale:
            raise CertificationError(
                f"scaling is not exact: saw p^{k} and p^{scale}")
    if k is None:
        raise CertificationError("no pair with certifiable distances")
    return k


def shadow_dilatation(g: MapSpec, orbit: PseudoOrbit, *,
                      max_iterations: int = 64) -> ShadowResult:
    """Sequence-space contraction shadow for a certified dilatation on Q_p.

    Iterates Phi((y_n)) = (g^-1(x_{n+1} + y_{n+1}) - x_n) from the zero
    sequence on the forward window; every sweep shrinks the correction
    sup-norm by at least p^-k (asserted), so the iteration reaches the
    precision floor in about window-width/k sweeps.  The resulting point
    x_0 + y*_0 is verified against the orbit in both directions; the
    backward bound comes from g^-1 being a p^-k contraction.
    """
    k = certify_expansion(g)
    if k < 1:
        raise CertificationError(f"not a dilatation: certified constant p^{k}")
    g_inv = invert_spec(g)
    p = g.prime
    delta = orbit.certified_delta
    eps_exp = delta.exponent
    fwd_last = orbit.end_index
    width = max(len(x.digits) for x in orbit.points)
    zero = QpApprox(p, eps_exp, (0,) * width)
    ys = [zero] * (fwd_last + 1)

    # Phi is triangular (entry n reads only entry n+1), so the fixed point of
    # the finite window is reached exactly after fwd_last+1 sweeps; pending
    # tail influence after sweep t is below p^-(eps + k(t+1)), which also
    # permits an earlier geometric stop once it is below every window end.
    correction_exponents = []
    iterations = 0
    converged = False
    while iterations < max_iterations:
        new = []
        for n in range(fwd_last + 1):
            if n + 1 <= fwd_last:
                val = g_inv.apply(orbit.point(n + 1) + ys[n + 1]) - orbit.point(n)
            else:
                val = zero
            if val.norm().gt_pow(eps_exp):
                raise CertificationError(
                    f"Phi left the epsilon ball at index {n}: the certified "
                    f"expansion constant is violated")
            new.append(val)
        corr = pnorm_max(distance(a, b) for a, b in zip(ys, new))
        fixed = all(u == v for u, v in zip(ys, new))
        ys = new
        iterations += 1
        if corr.exact:
            if correction_exponents and corr.exponent < correction_exponents[-1] + k:
                raise CertificationError(
                    f"correction decayed by less than p^-{k}: "
                    f"{correction_exponents[-1]} -> {corr.exponent}")
            correction_exponents.append(corr.exponent)
        floor = max(v.window_end for v in ys)
        if (fixed or iterations >= fwd_last + 1
                or eps_exp + k * (iterations + 1) >= floor):
            converged = True
            break
    point = orbit.point(0) + ys[0]

    dists = {}
    cur = point
    for n in range(0, fwd_last + 1):
        dists[n] = distance(orbit.point(n), cur)
        cur = g.apply(cur)
    cur = point
    for n in range(-1, orbit.start_index - 1, -1):
        cur = g_inv.apply(cur)
        dists[n] = distance(orbit.point(n), cur)
    ordered = tuple(dists[n] for n in range(orbit.start_index, fwd_last + 1))
    for n, d in zip(range(orbit.start_index, fwd_last + 1), ordered):
        if d.gt_pow(eps_exp):
            raise PadicError(
                f"internal: contraction shadow violates epsilon at step {n}: "
                f"{d.describe(p)}")
    return ShadowResult(
        point=point,
        epsilon=pnorm_max(ordered),
        step_distances=ordered,
        start_index=orbit.start_index,
        solver="dilatation",
        details={
            "expansion_exponent": k,
            "iterations": iterations,
            "converged": converged,
            "correction_exponents": tuple(correction_exponents),
        },
    )


_HEADER_RE = re.compile(r"^#\s*(.*)$")


def save_orbit(orbit: PseudoOrbit, path) -> None:
    """Write the orbit file: one header line, then one textual value per line."""
    delta = orbit.certified_delta
    domain = "zp" if isinstance(orbit.points[0], ZpApprox) else "qp"
    header = (
        f"# prime={int(orbit.prime)} domain={domain} "
        f"delta_exponent={delta.exponent} delta_exact={int(delta.exact)} "
        f"start_index={orbit.start_index} count={len(orbit.points)}"
    )
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(header + "\n")
        for x in orbit.points:
            fh.write(encode_value(x) + "\n")


def load_orbit_points(path):
    """Read an orbit file; returns (points, start_index, header dict).

    Residuals are not stored in the file; rebuild the orbit against a map
    with :meth:`PseudoOrbit.from_map`, which recomputes and recertifies them.
    """
    with open(path, encoding="utf-8") as fh:
        lines = [ln.strip() for ln in fh if ln.strip()]
    m = _HEADER_RE.match(lines[0])
    if m is None:
        raise ValueError("orbit file must start with a '#' header line")
    header = {}
    for part in m.group(1).split():
        key, _, value = part.partition("=")
        header[key] = value
    domain = header.get("domain", "zp")
    points = tuple(parse_value(ln, domain) for ln in lines[1:])
    start = int(header.get("start_index", "0"))
    if int(header.get("count", len(points))) != len(points):
        raise ValueError("orbit file count does not match the number of points")
    return points, start, header
