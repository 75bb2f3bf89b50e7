"""Pseudo-orbits and the four shadowing solvers, cross-checked exhaustively."""

import random

import pytest

from padicdyn.core import (
    PadicError,
    PrecisionError,
    Prime,
    QpApprox,
    ZpApprox,
    distance,
)
from padicdyn.maps import (
    AffineQp,
    AffineZp,
    ScalingClass,
    ShiftPower,
    Substitution,
    TableMap,
    random_table,
    table_from_spec,
)
from padicdyn.oracle import brute_shadow_points
from padicdyn.shadowing import (
    CertificationError,
    ConstraintUnsolvable,
    PseudoOrbit,
    certify_expansion,
    certify_one_lipschitz,
    load_orbit_points,
    perturb_orbit,
    perturb_orbit_two_sided,
    save_orbit,
    shadow_affine_qp,
    shadow_dilatation,
    shadow_lipschitz,
    shadow_locally_scaling,
)


def rand_point(rng, p, n):
    return ZpApprox(p, tuple(rng.randrange(p) for _ in range(n)))


def test_perturb_orbit_deterministic():
    table = table_from_spec(ShiftPower(Prime(2), 1))
    x0 = ZpApprox.from_int(0b1011011101, 2, 14)
    o1 = perturb_orbit(table, x0, 2, 5, seed=42)
    o2 = perturb_orbit(table, x0, 2, 5, seed=42)
    assert o1.points == o2.points and o1.residuals == o2.residuals
    o3 = perturb_orbit(table, x0, 2, 5, seed=43)
    assert o3.points != o1.points


def test_perturb_orbit_certified_delta():
    # oracle: recompute residual norms from the points
    table = table_from_spec(ShiftPower(Prime(3), 1))
    rng = random.Random(1)
    for trial in range(100):
        x0 = rand_point(rng, 3, 14)
        orbit = perturb_orbit(table, x0, 2, 4, seed=trial)
        assert orbit.validate(table)
        assert orbit.certified_delta.leq_pow(2)
        recomputed = [orbit.points[i + 1] - table.eval(orbit.points[i])
                      for i in range(4)]
        for w, r in zip(orbit.residuals, recomputed):
            assert w == r


def test_perturb_orbit_at_precision_floor_is_true_orbit():
    table = table_from_spec(ShiftPower(Prime(2), 1))
    x0 = ZpApprox.from_int(0b110101, 2, 10)
    orbit = perturb_orbit(table, x0, 99, 4, seed=0)
    for n in range(5):
        want = x0
        for _ in range(n):
            want = table.eval(want)
        assert orbit.points[n] == want


def test_pseudo_orbit_validation_and_accessors():
    table = table_from_spec(ShiftPower(Prime(2), 1))
    x0 = ZpApprox.from_int(0b101101, 2, 10)
    orbit = perturb_orbit(table, x0, 3, 3, seed=5)
    assert orbit.point(0) == x0
    assert not orbit.two_sided
    with pytest.raises(ValueError):
        PseudoOrbit((x0,), ())


def test_shadow_true_orbit_is_trivial():
    table = table_from_spec(ShiftPower(Prime(2), 1))
    x0 = ZpApprox.from_int(0b1101011, 2, 12)
    orbit = perturb_orbit(table, x0, 99, 4, seed=0)
    res = shadow_locally_scaling(table, orbit, s=1)
    assert res.point.digits == x0.digits[: res.point.precision]
    assert all(not d.exact for d in res.step_distances)


def test_shadow_shift_matches_every_exhaustive_solution():
    # class (1,1), s=1: the solver's digits agree with every candidate found
    # by brute force over all of Z/2^N (uniqueness from expansivity)
    p, k, m, s, N = 2, 1, 1, 1, 12
    table = table_from_spec(ShiftPower(Prime(p), k))
    rng = random.Random(7)
    for trial in range(20):
        T = (N - k - s) // m
        x0 = rand_point(rng, p, k + s + T * m)
        orbit = perturb_orbit(table, x0, k + s, T, seed=100 + trial)
        res = shadow_locally_scaling(table, orbit, s=s)
        sols = brute_shadow_points(table, orbit.points, k, m, s, N)
        assert sols, "the solver's own output must appear among candidates"
        for yi in sols:
            cand = ZpApprox.from_int(yi, p, N)
            n = min(cand.precision, res.point.precision)
            assert cand.digits[:n] == res.point.digits[:n]


def test_shadow_epsilon_delta_pairing():
    # class (3,1), s=0: orbits at delta = p^-2 are shadowed at eps = p^-3
    rng = random.Random(11)
    table = random_table(rng, 2, ScalingClass(3, 1), 5)
    x0 = rand_point(rng, 2, 3 + 10 * 1 + 1)
    orbit = perturb_orbit(table, x0, 2, 10, seed=3)
    assert orbit.certified_delta.leq_pow(2)
    res = shadow_locally_scaling(table, orbit, s=0)
    assert res.epsilon.leq_pow(3)
    assert res.details["delta_exponent"] == 2
    # independent verification from scratch
    cur = res.point
    for n in range(len(orbit.points)):
        assert distance(orbit.points[n], cur).leq_pow(3)
        if n < len(orbit.points) - 1:
            cur = table.eval(cur)


def test_shadow_m_equals_k_delta():
    # m = k: delta = p^-(k+s), not p^-(l+s)
    rng = random.Random(13)
    table = random_table(rng, 3, ScalingClass(2, 2), 5)
    x0 = rand_point(rng, 3, 2 + 1 + 6 * 2)
    orbit = perturb_orbit(table, x0, 3, 6, seed=5)
    res = shadow_locally_scaling(table, orbit, s=1)
    assert res.details["delta_exponent"] == 3
    assert res.epsilon.leq_pow(3)


def test_shadow_rejects_insufficient_delta():
    table = table_from_spec(ShiftPower(Prime(2), 2))  # class (2,2): delta = p^-(2+s)
    rng = random.Random(17)
    x0 = rand_point(rng, 2, 16)
    orbit = perturb_orbit(table, x0, 1, 3, seed=1)    # residuals up to 2^-1
    if orbit.certified_delta.gt_pow(2):
        with pytest.raises(PrecisionError):
            shadow_locally_scaling(table, orbit, s=0)


def test_shadow_rejects_two_sided():
    p = Prime(3)
    a = QpApprox(p, -1, (1,) + (0,) * 19)
    b = QpApprox(p, 0, (0,) * 20)
    spec = AffineQp(a, b)
    x0 = QpApprox(p, 0, tuple(random.Random(0).randrange(3) for _ in range(12)))
    orbit = perturb_orbit_two_sided(spec, x0, 3, 2, 2, seed=9)
    table = table_from_spec(ShiftPower(p, 1))
    with pytest.raises(PadicError):
        shadow_locally_scaling(table, orbit, s=0)
    with pytest.raises(PadicError):
        shadow_lipschitz(Substitution(p, ((0,), (1,), (2,))), orbit)


def test_shadow_detects_lying_residuals():
    # a hand-built orbit whose stored residuals under-report the true error:
    # at s=1 the automatic digit of f(y) must match the orbit, and does not
    table = table_from_spec(ShiftPower(Prime(2), 1))
    x0 = ZpApprox.from_int(0b1010101, 2, 10)
    x1_true = table.eval(x0)
    x1_bad = x1_true + ZpApprox.from_int(1, 2, x1_true.precision)  # error 2^0
    zero = ZpApprox.from_int(0, 2, x1_true.precision)
    lying = PseudoOrbit((x0, x1_bad), (zero,))
    assert not lying.validate(table)
    with pytest.raises(ConstraintUnsolvable):
        shadow_locally_scaling(table, lying, s=1)


def test_shadow_monotone_in_delta():
    # genuinely smaller residuals never worsen the achieved epsilon
    rng = random.Random(19)
    table = random_table(rng, 2, ScalingClass(2, 1), 6)
    x0 = rand_point(rng, 2, 24)
    loose = perturb_orbit(table, x0, 1, 6, seed=23)
    tight = perturb_orbit(table, x0, 3, 6, seed=23)
    res_loose = shadow_locally_scaling(table, loose, s=0)
    res_tight = shadow_locally_scaling(table, tight, s=2)
    assert res_tight.epsilon.exponent >= res_loose.epsilon.exponent


def test_lipschitz_shadow_substitution():
    sub = Substitution(Prime(2), ((0, 1), (0,)))
    rng = random.Random(29)
    for trial in range(20):
        x0 = rand_point(rng, 2, 12)
        orbit = perturb_orbit(sub, x0, 3, 8, seed=trial)
        res = shadow_lipschitz(sub, orbit)
        assert res.point == x0
        assert res.epsilon.leq_pow(3)
        assert res.details["certification"] == "structural:substitution"


def test_lipschitz_shadow_affine_isometry():
    # a = 1: an isometry; delta = p^-3 over 20 steps
    p = Prime(3)
    spec = AffineZp(ZpApprox.from_int(1, 3, 30), ZpApprox.from_int(5, 3, 30))
    x0 = ZpApprox.from_int(7, 3, 30)
    orbit = perturb_orbit(spec, x0, 3, 20, seed=31)
    res = shadow_lipschitz(spec, orbit)
    assert res.epsilon.leq_pow(3)
    # direct verification oracle
    cur = x0
    for n in range(len(orbit.points)):
        assert distance(orbit.points[n], cur).leq_pow(3)
        if n < len(orbit.points) - 1:
            cur = spec.apply(cur)


def test_lipschitz_shadow_below_precision_delta():
    sub = Substitution(Prime(2), ((1,), (0,)))
    x0 = ZpApprox.from_int(0b110, 2, 10)
    orbit = perturb_orbit(sub, x0, 99, 5, seed=0)
    res = shadow_lipschitz(sub, orbit)
    assert all(not d.exact for d in res.step_distances)


def test_certify_one_lipschitz_rejects_expanding_map():
    table = table_from_spec(ShiftPower(Prime(2), 1))
    with pytest.raises(CertificationError):
        certify_one_lipschitz(TableMap(table))


def test_certify_one_lipschitz_ga_mod_zp():
    from padicdyn.maps import GaModZp

    p = Prime(3)
    contraction = GaModZp(QpApprox(p, 1, (2,) + (0,) * 9))   # ||a|| = 1/3
    assert certify_one_lipschitz(contraction) == "structural:ga-mod-zp"
    expanding = GaModZp(QpApprox(p, -1, (1,) + (0,) * 9))    # ||a|| = 3
    with pytest.raises(CertificationError):
        certify_one_lipschitz(expanding)


def test_affine_qp_true_orbit():
    p = Prime(3)
    a = QpApprox(p, -1, (1,) + (0,) * 23)
    b = QpApprox(p, 0, (2, 1) + (0,) * 22)
    spec = AffineQp(a, b)
    x0 = QpApprox(p, -1, tuple(random.Random(2).randrange(3) for _ in range(16)))
    orbit = perturb_orbit_two_sided(spec, x0, 99, 4, 4, seed=0)
    res = shadow_affine_qp(a, b, orbit)
    assert distance(res.point, x0).exact is False


def test_affine_qp_series_branch():
    # ||a|| = 3 > 1: x = x_0 + sum a^-i w_{i-1}, verified both directions
    p = Prime(3)
    a = QpApprox(p, -1, (1,) + (0,) * 29)
    b = QpApprox(p, 0, (0,) * 30)
    spec = AffineQp(a, b)
    rng = random.Random(37)
    for trial in range(10):
        x0 = QpApprox(p, -2, tuple(rng.randrange(3) for _ in range(20)))
        orbit = perturb_orbit_two_sided(spec, x0, 2, 5, 5, seed=trial)
        res = shadow_affine_qp(a, b, orbit)
        assert res.details["branch"] == "series"
        assert res.epsilon.leq_pow(2)
        assert res.start_index == -5 and res.horizon == 5
        # the bound equals the certified sup of the residuals
        assert res.epsilon.leq_pow(orbit.certified_delta.exponent)


def test_affine_qp_mirror_branch():
    p = Prime(2)
    a = QpApprox(p, 2, (1,) + (0,) * 29)   # ||a|| = 1/4
    b = QpApprox(p, 0, (1,) + (0,) * 29)
    spec = AffineQp(a, b)
    rng = random.Random(41)
    x0 = QpApprox(p, -1, tuple(rng.randrange(2) for _ in range(20)))
    orbit = perturb_orbit_two_sided(spec, x0, 2, 5, 5, seed=7)
    res = shadow_affine_qp(a, b, orbit)
    assert res.details["branch"] == "mirror"
    assert res.epsilon.leq_pow(2)


def test_affine_qp_isometry_branch():
    p = Prime(3)
    a = QpApprox(p, 0, (2,) + (0,) * 23)   # ||a|| = 1
    b = QpApprox(p, 0, (1,) + (0,) * 23)
    spec = AffineQp(a, b)
    x0 = QpApprox(p, 0, tuple(random.Random(3).randrange(3) for _ in range(16)))
    orbit = perturb_orbit_two_sided(spec, x0, 2, 4, 4, seed=11)
    res = shadow_affine_qp(a, b, orbit)
    assert res.details["branch"] == "isometry"
    assert res.point == x0
    assert res.epsilon.leq_pow(2)


def test_dilatation_cross_check_with_series():
    p = Prime(3)
    a = QpApprox(p, -1, (1,) + (0,) * 29)
    b = QpApprox(p, 0, (0,) * 30)
    spec = AffineQp(a, b)
    rng = random.Random(43)
    for trial in range(5):
        x0 = QpApprox(p, -1, tuple(rng.randrange(3) for _ in range(18)))
        orbit = perturb_orbit_two_sided(spec, x0, 2, 4, 6, seed=trial)
        r_series = shadow_affine_qp(a, b, orbit)
        r_fixed = shadow_dilatation(spec, orbit)
        assert r_fixed.epsilon.leq_pow(2)
        d = distance(r_series.point, r_fixed.point)
        assert not d.exact, f"solvers disagree: {d.describe(3)}"


def test_dilatation_true_orbit_converges_immediately():
    # residuals vanish: Phi fixes the zero sequence, so y* = 0 and the point
    # is x_0 itself; the sweep loop notices within two sweeps
    p = Prime(2)
    a = QpApprox(p, -2, (1,) + (0,) * 29)
    b = QpApprox(p, 0, (1,) + (0,) * 29)
    spec = AffineQp(a, b)
    x0 = QpApprox(p, 0, tuple(random.Random(5).randrange(2) for _ in range(16)))
    orbit = perturb_orbit_two_sided(spec, x0, 99, 3, 4, seed=0)
    res = shadow_dilatation(spec, orbit)
    assert res.details["iterations"] <= 2
    assert res.details["converged"]
    assert res.details["correction_exponents"] == ()
    assert not distance(res.point, x0).exact


def test_dilatation_correction_decay():
    # corrections contract by at least p^-k per sweep (monotone exponents)
    p = Prime(2)
    a = QpApprox(p, -2, (1,) + (0,) * 29)
    b = QpApprox(p, 0, (0,) * 30)
    spec = AffineQp(a, b)
    x0 = QpApprox(p, 0, tuple(random.Random(7).randrange(2) for _ in range(20)))
    orbit = perturb_orbit_two_sided(spec, x0, 3, 2, 6, seed=3)
    res = shadow_dilatation(spec, orbit)
    exps = res.details["correction_exponents"]
    k = res.details["expansion_exponent"]
    assert k == 2
    for e0, e1 in zip(exps, exps[1:]):
        assert e1 >= e0 + k
    # geometric bound on the sweep count to reach the precision floor
    width = max(len(q.digits) for q in orbit.points)
    assert res.details["iterations"] <= (width // k) + 2


def test_certify_expansion():
    p = Prime(2)
    a = QpApprox(p, -2, (1,) + (0,) * 9)
    assert certify_expansion(AffineQp(a, QpApprox(p, 0, (0,) * 10))) == 2
    with pytest.raises(CertificationError):
        shadow_dilatation(
            AffineQp(QpApprox(p, 1, (1,) + (0,) * 9), QpApprox(p, 0, (0,) * 10)),
            perturb_orbit_two_sided(
                AffineQp(QpApprox(p, 1, (1,) + (0,) * 9), QpApprox(p, 0, (0,) * 10)),
                QpApprox(p, 0, tuple([1] + [0] * 9)), 2, 1, 2, seed=0))


def test_orbit_file_round_trip(tmp_path):
    table = table_from_spec(ShiftPower(Prime(2), 1))
    x0 = ZpApprox.from_int(0b1011011, 2, 12)
    orbit = perturb_orbit(table, x0, 2, 4, seed=77)
    path = tmp_path / "orbit.txt"
    save_orbit(orbit, path)
    points, start, header = load_orbit_points(path)
    assert points == orbit.points and start == 0
    assert header["prime"] == "2" and header["domain"] == "zp"
    rebuilt = PseudoOrbit.from_map(table, points, start)
    assert rebuilt.certified_delta == orbit.certified_delta
    # byte stability
    path2 = tmp_path / "orbit2.txt"
    save_orbit(rebuilt, path2)
    assert path.read_bytes() == path2.read_bytes()
