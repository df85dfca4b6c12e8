import math

import numpy as np
import pytest

from disklab.hitsolver import (
    DISK,
    FIXED,
    HIT,
    MISS_CERTIFIED,
    MISS_UNCERTAIN,
    HitProblem,
    SolverSettings,
    best_alpha,
    certify_miss,
    constrained_lsq,
    power_map,
    random_search,
    reverify_witness,
    solve_hit,
)
from disklab.operators import (
    BackwardShift,
    Dense,
    DirectSum,
    ForwardShift,
    Scalar,
    WeightProfile,
    as_dense,
)
from disklab.vectorspace import (
    BILATERAL,
    UNILATERAL,
    Ball,
    ComplexVector,
    IndexWindow,
    ProductBall,
    ProductVector,
    norm,
    sample_ball,
)

EXAMPLE_SHIFT = ForwardShift(WeightProfile(2.0, 3.0))


def unit_ball_problem(window_m=16, n=10, radius=0.5, mode=DISK, alphas=None):
    w = IndexWindow(BILATERAL, window_m)
    e0 = ComplexVector.basis(w, 0)
    return HitProblem(
        components=(EXAMPLE_SHIFT,),
        n=n,
        sources=ProductBall((Ball(e0, radius),)),
        targets=ProductBall((Ball(e0, radius),)),
        mode=mode,
        fixed_alphas=alphas,
    )


def test_best_alpha_frozen_cases():
    w = IndexWindow(UNILATERAL, 2)
    e0 = ComplexVector.basis(w, 0)
    e1 = ComplexVector.basis(w, 1)
    assert best_alpha(e0, e0 * 0.5) == 0.5
    assert best_alpha(e0, e0 * 2.0) == 1.0  # clamped to the disk rim
    assert best_alpha(ComplexVector.zero(w), e0) == 1.0
    assert abs(best_alpha(e0, e1)) == 1e-12  # orthogonal: floor, not zero
    a = best_alpha(e0, e0 * (3.0 * np.exp(0.7j)))
    assert abs(a) == pytest.approx(1.0)
    assert np.angle(a) == pytest.approx(0.7)


def test_constrained_lsq_identity_closed_form():
    w = IndexWindow(UNILATERAL, 3)
    rng = np.random.default_rng(0)
    for _ in range(20):
        u = ComplexVector(w, rng.standard_normal(4) + 1j * rng.standard_normal(4))
        v = ComplexVector(w, rng.standard_normal(4) + 1j * rng.standard_normal(4))
        eps = float(rng.uniform(0.1, 3.0))
        sol = constrained_lsq(power_map(Scalar(1.0), 1, w), u, eps, v)
        assert sol.residual == pytest.approx(max(0.0, norm(u - v) - eps), abs=1e-10)
        assert sol.kkt_residual <= 1e-10


def test_constrained_lsq_beats_sampling_oracle():
    w = IndexWindow(UNILATERAL, 3)
    rng = np.random.default_rng(1)
    for trial in range(5):
        m = rng.standard_normal((4, 4)) + 1j * rng.standard_normal((4, 4))
        pmap = power_map(Dense(m), 2, w, alpha=0.7 * np.exp(0.3j))
        u = ComplexVector(w, rng.standard_normal(4) + 1j * rng.standard_normal(4))
        v = ComplexVector(w, rng.standard_normal(4) + 1j * rng.standard_normal(4))
        eps = 0.8
        sol = constrained_lsq(pmap, u, eps, v)
        assert sol.kkt_residual <= 1e-8
        best = math.inf
        for _ in range(40):
            block = rng.standard_normal((500, 4)) + 1j * rng.standard_normal((500, 4))
            block /= np.linalg.norm(block, axis=1)[:, None]
            radii = eps * rng.uniform(size=500) ** (1 / 8)
            z = u.coeffs + block * radii[:, None]
            res = np.linalg.norm(pmap.apply_batch(z) - v.coeffs, axis=1)
            best = min(best, float(res.min()))
        assert sol.residual <= best + 1e-9


def test_ortho_and_dense_routes_agree():
    w = IndexWindow(BILATERAL, 6)
    t = ForwardShift(WeightProfile(2.0, 3.0, {0: 0.5}))
    alpha = 0.37 * np.exp(0.9j)
    native = power_map(t, 3, w, alpha)
    via_dense = power_map(Dense(as_dense(t, w)), 3, w, alpha)
    rng = np.random.default_rng(2)
    u = ComplexVector(w, rng.standard_normal(w.dim) + 1j * rng.standard_normal(w.dim))
    v = ComplexVector(w, rng.standard_normal(w.dim) + 1j * rng.standard_normal(w.dim))
    a = constrained_lsq(native, u, 0.6, v)
    b = constrained_lsq(via_dense, u, 0.6, v)
    assert a.residual == pytest.approx(b.residual, rel=1e-9, abs=1e-9)
    assert a.kkt_residual <= 1e-9 and b.kkt_residual <= 1e-8
    assert norm(a.z - b.z) <= 1e-7 * (1 + norm(a.z))


def test_trs_boundary_case_is_tight():
    w = IndexWindow(UNILATERAL, 2)
    # far target forces the solution onto the ball boundary
    u = ComplexVector.zero(w)
    v = ComplexVector.basis(w, 0) * 100.0
    sol = constrained_lsq(power_map(Scalar(1.0), 1, w), u, 1.0, v)
    assert sol.boundary
    assert norm(sol.z - u) == pytest.approx(1.0, rel=1e-12)
    assert sol.residual == pytest.approx(99.0, rel=1e-12)


def test_criterion_scalar_is_recorded_on_hits():
    res = solve_hit(unit_ball_problem(n=10))
    assert res.status == HIT
    lam = res.witness.alphas[0]
    assert abs(lam) == pytest.approx(6.0**-5, rel=1e-12)
    assert res.witness.residuals[0] < 0.5 - 1e-9
    assert res.max_kkt_residual <= 1e-8
    # the recorded scalar follows sqrt(backward mass / forward mass) at every
    # tail power, not just n = 10
    for n in (6, 9, 14):
        r = solve_hit(unit_ball_problem(n=n))
        assert r.status == HIT
        assert abs(r.witness.alphas[0]) == pytest.approx(6.0 ** (-n / 2), rel=1e-10)


def test_witness_reverifies_on_larger_window():
    p = unit_ball_problem(n=10)
    res = solve_hit(p)
    assert reverify_witness(p, res.witness) <= 1e-10


def test_fixed_unit_scaling_certified_miss():
    p = unit_ball_problem(n=2, mode=FIXED, alphas=(1.0,))
    res = solve_hit(p)
    assert res.status == MISS_CERTIFIED
    assert res.bound_kind == "minmod"
    # min-modulus 2^2 times inner radius 0.5, minus target center norm 1
    assert res.lower_bound == pytest.approx(1.0)
    assert res.certified_component == 0


def test_fixed_miss_not_certified_at_n1():
    res = solve_hit(unit_ball_problem(n=1, mode=FIXED, alphas=(1.0,)))
    assert res.status in (MISS_UNCERTAIN, MISS_CERTIFIED)
    # the growth bound gives exactly 2 * 0.5 - 1 = 0 at n = 1: too weak
    assert certify_miss(unit_ball_problem(n=1, mode=FIXED, alphas=(1.0,))) is None


def test_disk_mode_contraction_certified_by_opnorm():
    w = IndexWindow(UNILATERAL, 2)
    e0 = ComplexVector.basis(w, 0)
    p = HitProblem(
        components=(Scalar(0.5),),
        n=2,
        sources=ProductBall((Ball(e0, 0.25),)),
        targets=ProductBall((Ball(e0, 0.25),)),
    )
    res = solve_hit(p)
    assert res.status == MISS_CERTIFIED
    assert res.bound_kind == "opnorm"
    # 1 - 0.25^2... opnorm 0.25 applied to norms <= 1.25 leaves at most 0.3125
    assert res.lower_bound == pytest.approx(1.0 - 0.25 * 1.25)


def test_disk_mode_certificate_never_uses_minmod():
    # expanding operator, disk scaling: tiny alpha always reaches the target
    p = unit_ball_problem(n=6)
    cert = certify_miss(p)
    assert cert is None
    assert solve_hit(p).status == HIT


def test_criterion_route_skipped_at_window_edge_still_solves():
    w = IndexWindow(BILATERAL, 4)
    edge = ComplexVector.basis(w, 3)
    p = HitProblem(
        components=(EXAMPLE_SHIFT,),
        n=3,
        sources=ProductBall((Ball(edge, 0.5),)),
        targets=ProductBall((Ball(ComplexVector.basis(w, 0), 0.5),)),
    )
    res = solve_hit(p)  # forward power of the center leaves the window
    assert res.status in (HIT, MISS_UNCERTAIN)


def test_direct_sum_flattens_to_components():
    w = IndexWindow(BILATERAL, 12)
    e0 = ComplexVector.basis(w, 0)
    joint = HitProblem(
        components=(DirectSum((EXAMPLE_SHIFT, Scalar(1.0))),),
        n=5,
        sources=ProductBall((Ball(e0, 0.5), Ball(e0, 0.5))),
        targets=ProductBall((Ball(e0, 0.5), Ball(e0, 0.5))),
    )
    assert len(joint.components) == 2
    res = solve_hit(joint)
    seps = [
        solve_hit(
            HitProblem(
                components=(op,),
                n=5,
                sources=ProductBall((Ball(e0, 0.5),)),
                targets=ProductBall((Ball(e0, 0.5),)),
            )
        )
        for op in (EXAMPLE_SHIFT, Scalar(1.0))
    ]
    assert (res.status == HIT) == all(s.status == HIT for s in seps)
    if res.status == HIT:
        for i, s in enumerate(seps):
            assert res.witness.alphas[i] == pytest.approx(s.witness.alphas[0])


def test_monotone_in_target_radius():
    for n in range(3, 12):
        tight = solve_hit(unit_ball_problem(n=n, radius=0.5))
        if tight.status != HIT:
            continue
        w = IndexWindow(BILATERAL, 16)
        e0 = ComplexVector.basis(w, 0)
        loose = HitProblem(
            components=(EXAMPLE_SHIFT,),
            n=n,
            sources=ProductBall((Ball(e0, 0.5),)),
            targets=ProductBall((Ball(e0, 0.75),)),
        )
        assert solve_hit(loose).status == HIT


def test_random_search_is_deterministic_and_finds_easy_hits():
    w = IndexWindow(UNILATERAL, 3)
    e0 = ComplexVector.basis(w, 0)
    p = HitProblem(
        components=(Scalar(1.0),),
        n=1,
        sources=ProductBall((Ball(e0, 0.5),)),
        targets=ProductBall((Ball(e0, 0.5),)),
    )
    a = random_search(p, samples=2000, seed=11)
    b = random_search(p, samples=2000, seed=11)
    assert a == b
    assert a.hits == (True,)
    assert a.best_residuals[0] < 0.5


def test_random_search_respects_fixed_alpha():
    p = unit_ball_problem(n=4, mode=FIXED, alphas=(1.0,))
    rep = random_search(p, samples=3000, seed=5)
    assert rep.best_alphas == (1.0,)
    assert rep.hits == (False,)


def test_problem_validation():
    w = IndexWindow(BILATERAL, 4)
    e0 = ComplexVector.basis(w, 0)
    balls = ProductBall((Ball(e0, 0.5),))
    with pytest.raises(ValueError):
        HitProblem(components=(EXAMPLE_SHIFT, Scalar(1.0)), n=1, sources=balls, targets=balls)
    with pytest.raises(ValueError):
        HitProblem(components=(EXAMPLE_SHIFT,), n=-1, sources=balls, targets=balls)
    with pytest.raises(ValueError):
        HitProblem(components=(EXAMPLE_SHIFT,), n=1, sources=balls, targets=balls, mode=FIXED)
    with pytest.raises(ValueError):
        HitProblem(
            components=(EXAMPLE_SHIFT,),
            n=1,
            sources=balls,
            targets=balls,
            mode=FIXED,
            fixed_alphas=(0.0,),
        )


def test_witness_points_are_strictly_feasible():
    for n in (3, 5, 8, 12):
        p = unit_ball_problem(n=n)
        res = solve_hit(p)
        if res.status == HIT:
            z = res.witness.point.parts[0]
            assert norm(z - p.sources.balls[0].center) < p.sources.balls[0].radius


def test_solver_matches_sampled_ball_instances():
    w = IndexWindow(BILATERAL, 10)
    rng_seeds = range(6)
    for seed in rng_seeds:
        src = Ball(sample_ball(Ball(ComplexVector.basis(w, 0), 0.4), seed=seed), 0.45)
        tgt = Ball(sample_ball(Ball(ComplexVector.basis(w, 1), 0.4), seed=100 + seed), 0.45)
        p = HitProblem(
            components=(EXAMPLE_SHIFT,),
            n=4,
            sources=ProductBall((src,)),
            targets=ProductBall((tgt,)),
        )
        res = solve_hit(p)
        search = random_search(p, samples=4000, seed=seed)
        if search.hits[0]:
            assert res.status == HIT
        if res.status == MISS_UNCERTAIN:
            assert res.best_residuals[0] <= search.best_residuals[0] + 1e-9
