"""Junction and cross scans over powers, and dynamical-class detection.

A junction scan asks, power by power, whether some disk scaling of T^n maps a
source ball into a target ball.  Detection runs scans over sampled ball pairs
and returns a three-way verdict: confirmed up to the horizon, refuted with a
certificate that extends beyond it, or inconclusive.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .hitsolver import (
    DEFAULT_SETTINGS,
    DISK,
    FIXED,
    HIT,
    MISS_CERTIFIED,
    HitProblem,
    SolverSettings,
    solve_hit,
)
from .operators import (
    OperatorError,
    OperatorSpec,
    DirectSum,
    ensure_power_fits,
    growth,
    power_apply,
    right_inverse,
)
from .vectorspace import (
    Ball,
    ComplexVector,
    IndexWindow,
    ProductBall,
    as_rng,
    norm,
    sample_finite_support,
)

__all__ = [
    "DISK_TRANSITIVE",
    "K_BITRANSITIVE",
    "COMPOUND",
    "MIXING",
    "CONFIRMED",
    "REFUTED",
    "INCONCLUSIVE",
    "JunctionEntry",
    "JunctionReport",
    "junction_scan",
    "CrossReport",
    "cross_scan",
    "TrialRecord",
    "Verdict",
    "detect",
    "make_ball_sampler",
    "disk_orbit_norms",
    "disk_orbit_points",
    "guard_scan_window",
]

DISK_TRANSITIVE = "disk_transitive"
K_BITRANSITIVE = "k_bitransitive"
COMPOUND = "compound"
MIXING = "mixing"

CONFIRMED = "confirmed_up_to_horizon"
REFUTED = "refuted_with_certificate"
INCONCLUSIVE = "inconclusive"

_KINDS = (DISK_TRANSITIVE, K_BITRANSITIVE, COMPOUND, MIXING)


def _flatten(components: Sequence[OperatorSpec]) -> tuple[OperatorSpec, ...]:
    comps = tuple(components)
    if len(comps) == 1 and isinstance(comps[0], DirectSum):
        return comps[0].components
    return comps


def guard_scan_window(
    components: Sequence[OperatorSpec],
    horizon: int,
    sources: ProductBall,
    targets: ProductBall,
) -> None:
    """Raise WindowGuardError if scanning to the horizon would shed mass of
    the ball centers (operator powers forward, right-inverse powers backward)."""
    comps = _flatten(components)
    for i, op in enumerate(comps):
        ensure_power_fits(op, horizon, sources.balls[i].center)
        try:
            s = right_inverse(op)
        except OperatorError:
            continue
        ensure_power_fits(s, horizon, targets.balls[i].center)


@dataclass(frozen=True)
class JunctionEntry:
    n: int
    status: str
    alphas: tuple[complex, ...] | None = None
    residuals: tuple[float, ...] | None = None
    lower_bound: float | None = None
    bound_kind: str | None = None
    certified_component: int | None = None


@dataclass(frozen=True)
class JunctionReport:
    horizon: int
    entries: tuple[JunctionEntry, ...]  # one per n in [0, horizon]
    hit_set: frozenset[int]  # powers n >= 1 with a witnessed hit
    tail_start: int | None  # least N >= 1 with hits at every n in [N, horizon]

    def entry(self, n: int) -> JunctionEntry:
        return self.entries[n]


def junction_scan(
    components: Sequence[OperatorSpec],
    sources: ProductBall,
    targets: ProductBall,
    horizon: int,
    mode: str = DISK,
    fixed_alphas: tuple[complex, ...] | None = None,
    settings: SolverSettings = DEFAULT_SETTINGS,
    guard: bool = True,
) -> JunctionReport:
    """Solve the hit problem at every power n in [0, horizon].

    Power 0 is recorded for completeness but never counts toward hit_set or
    tail_start: the identity carries no dynamical information.
    """
    if horizon < 1:
        raise ValueError("horizon must be at least 1")
    comps = _flatten(components)
    if guard:
        guard_scan_window(comps, horizon, sources, targets)
    entries = []
    for n in range(horizon + 1):
        res = solve_hit(
            HitProblem(
                components=comps,
                n=n,
                sources=sources,
                targets=targets,
                mode=mode,
                fixed_alphas=fixed_alphas,
                settings=settings,
            )
        )
        if res.status == HIT:
            entries.append(
                JunctionEntry(
                    n=n,
                    status=HIT,
                    alphas=res.witness.alphas,
                    residuals=res.witness.residuals,
                )
            )
        else:
            entries.append(
                JunctionEntry(
                    n=n,
                    status=res.status,
                    residuals=res.best_residuals,
                    lower_bound=res.lower_bound,
                    bound_kind=res.bound_kind,
                    certified_component=res.certified_component,
                )
            )
    hit_set = frozenset(e.n for e in entries if e.status == HIT and e.n >= 1)
    tail_start = None
    for start in range(1, horizon + 1):
        if all(m in hit_set for m in range(start, horizon + 1)):
            tail_start = start
            break
    return JunctionReport(
        horizon=horizon,
        entries=tuple(entries),
        hit_set=hit_set,
        tail_start=tail_start,
    )


@dataclass(frozen=True)
class CrossReport:
    horizon: int
    forward: frozenset[int]  # powers hitting source -> target
    backward: frozenset[int]  # powers hitting target -> source
    junction: frozenset[int]  # their intersection
    forward_report: JunctionReport
    backward_report: JunctionReport


def cross_scan(
    components: Sequence[OperatorSpec],
    a: ProductBall,
    b: ProductBall,
    horizon: int,
    mode: str = DISK,
    fixed_alphas: tuple[complex, ...] | None = None,
    settings: SolverSettings = DEFAULT_SETTINGS,
    guard: bool = True,
) -> CrossReport:
    """Hit powers in both directions between two ball tuples, plus the
    two-sided junction set."""
    fwd = junction_scan(components, a, b, horizon, mode, fixed_alphas, settings, guard)
    bwd = junction_scan(components, b, a, horizon, mode, fixed_alphas, settings, guard)
    return CrossReport(
        horizon=horizon,
        forward=fwd.hit_set,
        backward=bwd.hit_set,
        junction=fwd.hit_set & bwd.hit_set,
        forward_report=fwd,
        backward_report=bwd,
    )


def _cert_extends(op: OperatorSpec, bound_kind: str, lattice: str) -> bool:
    """One-step growth condition under which a certificate at the horizon
    stays valid for every larger power."""
    try:
        gb = growth(op, 1, lattice)
    except (OperatorError, ValueError):
        return False
    if bound_kind == "minmod":
        return gb.minmod_lower >= 1.0
    return gb.opnorm_upper <= 1.0


@dataclass(frozen=True)
class TrialRecord:
    index: int
    first_hit: int | None
    tail_start: int | None
    certified_all: bool  # every n in [1, horizon] certified, extension valid
    certified_tail_from: int | None  # suffix fully certified, extension valid
    hit_count: int


@dataclass(frozen=True)
class Verdict:
    kind: str
    verdict: str
    horizon: int
    trials: tuple[TrialRecord, ...]
    refuting_trial: int | None = None

    @property
    def confirmed(self) -> bool:
        return self.verdict == CONFIRMED


def make_ball_sampler(
    window: IndexWindow,
    arity: int,
    radius: float = 0.45,
    support: int = 2,
    bound: float = 1.0,
    band: int | None = None,
    modulus_lo: float | None = 0.5,
) -> Callable[[object], ProductBall]:
    """Sampler of ball tuples with finitely supported centers.

    The default keeps center coefficients with modulus in [0.5, 1.0] so that
    certificates have room on both sides of the radius.
    """
    if arity < 1:
        raise ValueError("arity must be at least 1")

    def sample(seed) -> ProductBall:
        rng = as_rng(seed)
        balls = tuple(
            Ball(sample_finite_support(window, support, bound, rng, band, modulus_lo), radius)
            for _ in range(arity)
        )
        return ProductBall(balls)

    return sample


def _kind_mode(kind: str, arity: int) -> tuple[str, tuple[complex, ...] | None]:
    if kind == MIXING:
        return FIXED, (1.0 + 0j,) * arity
    return DISK, None


def detect(
    kind: str,
    components: Sequence[OperatorSpec],
    ball_sampler: Callable[[object], ProductBall],
    trials: int = 20,
    horizon: int = 40,
    seed: int = 0,
    tail_fraction: float = 0.5,
    settings: SolverSettings = DEFAULT_SETTINGS,
    max_workers: int = 1,
) -> Verdict:
    """Sample ball tuples and scan for the behavior the kind demands.

    Existential kinds (disk_transitive, k_bitransitive) confirm when every
    trial hits at some power n >= 1; they refute only when a trial certifies
    misses at every power including past the horizon.  Cofinite kinds
    (compound, mixing) confirm when every trial hits at all powers from some
    tail_start <= tail_fraction * horizon on; they refute when a trial
    certifies a full suffix of misses that extends beyond the horizon.

    Trials are independent; max_workers > 1 runs them on a thread pool.
    The verdict does not depend on the worker count.
    """
    if kind not in _KINDS:
        raise ValueError(f"unknown kind {kind!r}")
    comps = _flatten(components)
    mode, fixed_alphas = _kind_mode(kind, len(comps))
    # deterministic per-trial seeds, two per trial
    children = np.random.SeedSequence(seed).spawn(2 * trials)

    def run_trial(t: int) -> TrialRecord:
        sources = ball_sampler(np.random.default_rng(children[2 * t]))
        targets = ball_sampler(np.random.default_rng(children[2 * t + 1]))
        rep = junction_scan(comps, sources, targets, horizon, mode, fixed_alphas, settings)
        cert_tail = _certified_suffix(rep, comps, sources)
        return TrialRecord(
            index=t,
            first_hit=min(rep.hit_set) if rep.hit_set else None,
            tail_start=rep.tail_start,
            certified_all=cert_tail == 1,
            certified_tail_from=cert_tail,
            hit_count=len(rep.hit_set),
        )

    if max_workers > 1 and trials > 1:
        with ThreadPoolExecutor(max_workers=max_workers) as pool:
            records = list(pool.map(run_trial, range(trials)))
    else:
        records = [run_trial(t) for t in range(trials)]
    refuting = None
    if kind in (DISK_TRANSITIVE, K_BITRANSITIVE):
        for r in records:
            if r.certified_all:
                refuting = r.index
                break
        if refuting is not None:
            verdict = REFUTED
        elif all(r.first_hit is not None for r in records):
            verdict = CONFIRMED
        else:
            verdict = INCONCLUSIVE
    else:
        tail_cut = max(1, math.ceil(horizon * tail_fraction))
        for r in records:
            if r.certified_tail_from is not None:
                refuting = r.index
                break
        if refuting is not None:
            verdict = REFUTED
        elif all(r.tail_start is not None and r.tail_start <= tail_cut for r in records):
            verdict = CONFIRMED
        else:
            verdict = INCONCLUSIVE
    return Verdict(
        kind=kind,
        verdict=verdict,
        horizon=horizon,
        trials=tuple(records),
        refuting_trial=refuting,
    )


def _certified_suffix(
    rep: JunctionReport, comps: tuple[OperatorSpec, ...], sources: ProductBall
) -> int | None:
    """Least n0 >= 1 with every n in [n0, horizon] certified missed and the
    horizon certificate valid for all larger powers; None if no such suffix."""
    last = rep.entries[rep.horizon]
    if last.status != MISS_CERTIFIED:
        return None
    ci = last.certified_component
    lattice = sources.balls[ci].center.window.kind
    if not _cert_extends(comps[ci], last.bound_kind, lattice):
        return None
    n0 = rep.horizon
    while n0 > 1 and rep.entries[n0 - 1].status == MISS_CERTIFIED:
        n0 -= 1
    return n0


def disk_orbit_norms(op: OperatorSpec, x: ComplexVector, horizon: int) -> np.ndarray:
    """Norms ||T^n x|| for n in [0, horizon] on the truncated window."""
    out = np.empty(horizon + 1, dtype=float)
    cur = x
    out[0] = norm(cur)
    for n in range(1, horizon + 1):
        cur = power_apply(op, 1, cur)
        out[n] = norm(cur)
    return out


def disk_orbit_points(
    op: OperatorSpec, x: ComplexVector, n: int, radial: int = 4, angular: int = 8
) -> np.ndarray:
    """Grid sample of the disk-scaled power image {alpha T^n x : |alpha| <= 1}.

    Returns an array of coefficient rows: the zero scaling plus radial x
    angular points with moduli l/radial and equally spaced phases.
    """
    w = power_apply(op, n, x).coeffs
    rows = [np.zeros_like(w)]
    for l in range(1, radial + 1):
        for m in range(angular):
            alpha = (l / radial) * np.exp(2j * np.pi * m / angular)
            rows.append(alpha * w)
    return np.array(rows)
