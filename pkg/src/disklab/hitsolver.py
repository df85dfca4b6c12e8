"""Single-power hit solving: can alpha T^n map a source ball into a target ball.

The joint problem over (alpha, z) is solved per component by alternating an
exact disk-projected scalar fit with an exact trust-region least-squares step
in z.  Misses are certified, when possible, by growth bounds of the
un-truncated operator.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .operators import (
    BackwardShift,
    Dense,
    Diagonal,
    DirectSum,
    ForwardShift,
    OperatorError,
    OperatorSpec,
    Scalar,
    WindowGuardError,
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
    ProductVector,
    as_rng,
    norm,
)

__all__ = [
    "DISK",
    "FIXED",
    "HIT",
    "MISS_CERTIFIED",
    "MISS_UNCERTAIN",
    "SolverSettings",
    "HitProblem",
    "Witness",
    "HitResult",
    "TrsResult",
    "PowerMap",
    "power_map",
    "best_alpha",
    "constrained_lsq",
    "certify_miss",
    "CertifiedMiss",
    "solve_hit",
    "random_search",
    "SearchReport",
    "reverify_witness",
]

DISK = "disk"
FIXED = "fixed"

HIT = "hit"
MISS_CERTIFIED = "miss_certified"
MISS_UNCERTAIN = "miss_uncertain"


@dataclass(frozen=True)
class SolverSettings:
    """Tolerances shared by the solve and certification paths."""

    residual_slack: float = 1e-9  # hits need residual < delta - slack
    alpha_floor: float = 1e-12  # smallest scalar modulus ever returned
    strict_margin: float = 1e-9  # source balls shrink by this factor for strictness
    cert_margin: float = 1e-12  # certificates need lower_bound >= delta + this
    max_iters: int = 40
    stall_eps: float = 1e-12


DEFAULT_SETTINGS = SolverSettings()


@dataclass(frozen=True)
class HitProblem:
    components: tuple[OperatorSpec, ...]
    n: int
    sources: ProductBall
    targets: ProductBall
    mode: str = DISK
    fixed_alphas: tuple[complex, ...] | None = None
    settings: SolverSettings = DEFAULT_SETTINGS

    def __post_init__(self):
        comps = tuple(self.components)
        # a single direct sum with matching product balls means the joint problem
        if len(comps) == 1 and isinstance(comps[0], DirectSum):
            comps = comps[0].components
        object.__setattr__(self, "components", comps)
        k = len(comps)
        if self.sources.arity != k or self.targets.arity != k:
            raise ValueError("ball arity does not match the number of components")
        if self.n < 0 or int(self.n) != self.n:
            raise ValueError("power must be a nonnegative integer")
        if self.mode not in (DISK, FIXED):
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.mode == FIXED:
            if self.fixed_alphas is None or len(self.fixed_alphas) != k:
                raise ValueError("fixed mode needs one alpha per component")
            alphas = tuple(complex(a) for a in self.fixed_alphas)
            if any(a == 0 or abs(a) > 1 + 1e-15 for a in alphas):
                raise ValueError("fixed alphas must be nonzero with modulus <= 1")
            object.__setattr__(self, "fixed_alphas", alphas)
        elif self.fixed_alphas is not None:
            raise ValueError("fixed_alphas only apply in fixed mode")


@dataclass(frozen=True)
class Witness:
    n: int
    alphas: tuple[complex, ...]
    point: ProductVector
    residuals: tuple[float, ...]


@dataclass(frozen=True)
class CertifiedMiss:
    lower_bound: float  # on inf ||alpha T^n z - v|| over the closed source ball
    component: int
    bound_kind: str  # "minmod" or "opnorm"


@dataclass(frozen=True)
class HitResult:
    status: str
    witness: Witness | None = None
    lower_bound: float | None = None
    certified_component: int | None = None
    bound_kind: str | None = None
    best_residuals: tuple[float, ...] | None = None
    best_alphas: tuple[complex, ...] | None = None
    max_kkt_residual: float = 0.0


def best_alpha(w: ComplexVector, v: ComplexVector, alpha_floor: float = 1e-12) -> complex:
    """Disk-projected minimizer of ||alpha w - v|| over the closed unit disk.

    The unconstrained optimum inner(v, w)/inner(w, w) is projected radially;
    w = 0 returns 1, and an exactly zero optimum returns alpha_floor.
    """
    ww = float(np.vdot(w.coeffs, w.coeffs).real)
    if ww == 0.0:
        return 1.0 + 0.0j
    a0 = complex(np.vdot(w.coeffs, v.coeffs)) / ww  # conjugates w: <v, w>/<w, w>
    if a0 == 0:
        return complex(alpha_floor)
    m = abs(a0)
    return a0 / m if m > 1.0 else a0


@dataclass(frozen=True)
class PowerMap:
    """alpha T^n on a window, in a form the least-squares kernel can consume.

    Shift, diagonal, and scalar powers have orthogonal columns: column j is
    coeffs[j] times a basis vector at tgt[j] (coeff 0 means the column died at
    the window edge).  Dense powers carry the explicit matrix.
    """

    kind: str  # "ortho" | "dense"
    window: IndexWindow
    alpha: complex
    coeffs: np.ndarray | None = None
    tgt: np.ndarray | None = None
    matrix: np.ndarray | None = None

    def apply_vec(self, arr: np.ndarray) -> np.ndarray:
        if self.kind == "dense":
            return self.matrix @ arr
        out = np.zeros_like(arr)
        live = self.coeffs != 0
        out[self.tgt[live]] = self.coeffs[live] * arr[live]
        return out

    def apply_batch(self, block: np.ndarray) -> np.ndarray:
        if self.kind == "dense":
            return block @ self.matrix.T
        out = np.zeros_like(block)
        live = self.coeffs != 0
        out[:, self.tgt[live]] = block[:, live] * self.coeffs[live]
        return out


def power_map(op: OperatorSpec, n: int, window: IndexWindow, alpha: complex = 1.0) -> PowerMap:
    d = window.dim
    alpha = complex(alpha)
    if isinstance(op, ForwardShift):
        coeffs = np.zeros(d, dtype=np.complex128)
        tgt = np.minimum(np.arange(d) + n, d - 1)
        if n == 0:
            coeffs[:] = alpha
        elif n < d:
            w = op.weights.weights_on(window.lo, window.hi - 1)
            prods = np.ones(d - n)
            for t in range(n):
                prods *= w[t : t + d - n]
            coeffs[: d - n] = alpha * prods
        return PowerMap("ortho", window, alpha, coeffs=coeffs, tgt=tgt)
    if isinstance(op, BackwardShift):
        coeffs = np.zeros(d, dtype=np.complex128)
        tgt = np.maximum(np.arange(d) - n, 0)
        if n == 0:
            coeffs[:] = alpha
        elif n < d:
            w = op.weights.weights_on(window.lo, window.hi - 1)
            prods = np.ones(d - n)
            for t in range(n):
                prods *= w[t : t + d - n]
            coeffs[n:] = alpha * prods
        return PowerMap("ortho", window, alpha, coeffs=coeffs, tgt=tgt)
    if isinstance(op, Diagonal):
        diag = op.entries_on(window)
        return PowerMap("ortho", window, alpha, coeffs=alpha * diag**n, tgt=np.arange(d))
    if isinstance(op, Scalar):
        c = np.full(d, alpha * op.value**n, dtype=np.complex128)
        return PowerMap("ortho", window, alpha, coeffs=c, tgt=np.arange(d))
    if isinstance(op, Dense):
        if op.matrix.shape[0] != d:
            raise OperatorError("dense matrix size does not match the window")
        return PowerMap("dense", window, alpha, matrix=alpha * np.linalg.matrix_power(op.matrix, n))
    raise OperatorError(f"no power map for {type(op).__name__}")


@dataclass(frozen=True)
class TrsResult:
    z: ComplexVector
    residual: float
    kkt_residual: float
    mu: float
    boundary: bool


def _secular_solve(q: np.ndarray, s: np.ndarray, eps: float) -> tuple[float, float]:
    """Solve sum s_i/(q_i+mu)^2 = eps^2 for mu > 0; returns (mu, norm at mu)."""

    def nrm(mu: float) -> float:
        return math.sqrt(float(np.sum(s / (q + mu) ** 2)))

    g_norm = math.sqrt(float(np.sum(s)))
    mu_hi = g_norm / eps
    mu_lo = 0.0
    mu = 0.5 * mu_hi
    val = nrm(mu)
    for _ in range(200):
        if abs(val - eps) <= 1e-14 * eps:
            break
        # Newton on f(mu) = 1/nrm - 1/eps, monotone increasing
        deriv = float(np.sum(s / (q + mu) ** 3)) / val**3
        if val > eps:
            mu_lo = mu
        else:
            mu_hi = mu
        step = (1.0 / val - 1.0 / eps) / deriv
        nxt = mu - step
        if not (mu_lo < nxt < mu_hi):
            nxt = 0.5 * (mu_lo + mu_hi)
        if nxt == mu:
            break
        mu = nxt
        val = nrm(mu)
    return mu, val


def _trs_core(q: np.ndarray, g: np.ndarray, eps: float) -> tuple[np.ndarray, float, bool, float]:
    """min ||A d - r||, ||d|| <= eps, expressed through q = eig(A^H A), g = A^H r.

    Returns (d, mu, boundary, norm_gap) with norm_gap = | ||d|| - eps | / eps
    when the solution sits on the boundary, else 0.
    """
    s = np.abs(g) ** 2
    if not np.any(s > 0):
        return np.zeros_like(g), 0.0, False, 0.0
    live = q > 0
    free_mass = bool(np.any(~live & (s > 0)))
    if not free_mass:
        d0 = np.zeros_like(g)
        d0[live] = g[live] / q[live]
        if float(np.linalg.norm(d0)) <= eps:
            return d0, 0.0, False, 0.0
    mu, val = _secular_solve(q, s, eps)
    d = g / (q + mu)
    return d, mu, True, abs(val - eps) / eps


def constrained_lsq(A: PowerMap, u: ComplexVector, eps: float, target: ComplexVector) -> TrsResult:
    """Exact minimizer of ||A z - target|| over the closed ball ||z - u|| <= eps.

    The reported kkt_residual is scale-invariant: stationarity is scaled by
    max(1, ||A^H r||), the ball violation and complementarity gap by eps.
    """
    if not (eps > 0):
        raise ValueError("ball radius must be positive")
    window = u.window
    r = target.coeffs - A.apply_vec(u.coeffs)
    if A.kind == "ortho":
        q = np.abs(A.coeffs) ** 2
        g = np.zeros(window.dim, dtype=np.complex128)
        live = A.coeffs != 0
        g[live] = np.conj(A.coeffs[live]) * r[A.tgt[live]]
        d, mu, boundary, gap = _trs_core(q, g, eps)
        stat = float(np.linalg.norm((q + mu) * d - g))
    else:
        m = A.matrix
        h = m.conj().T @ m
        evals, evecs = np.linalg.eigh(h)
        evals = np.clip(evals, 0.0, None)
        g_full = m.conj().T @ r
        g = evecs.conj().T @ g_full
        d_eig, mu, boundary, gap = _trs_core(evals, g, eps)
        d = evecs @ d_eig
        stat = float(np.linalg.norm((evals + mu) * d_eig - g))
        g = g_full
    g_scale = max(1.0, float(np.linalg.norm(g)))
    dn = float(np.linalg.norm(d))
    feas = max(0.0, dn - eps) / eps
    comp = gap if boundary else 0.0
    kkt = max(stat / g_scale, feas, comp)
    z = ComplexVector(window, u.coeffs + d)
    residual = float(np.linalg.norm(A.apply_vec(z.coeffs) - target.coeffs))
    return TrsResult(z=z, residual=residual, kkt_residual=kkt, mu=mu, boundary=boundary)


def _component_bounds(op, n, src: Ball, tgt: Ball, mode, alpha) -> tuple[float, str] | None:
    """Best valid lower bound on inf ||alpha T^n z - v|| over the closed source ball.

    The lattice for the growth bound is the kind of the window the balls live
    on: un-truncated dynamics on that lattice is what the bound models.
    """
    try:
        gb = growth(op, n, src.center.window.kind)
    except (OperatorError, ValueError):
        return None
    nu = norm(src.center)
    nv = norm(tgt.center)
    cands: list[tuple[float, str]] = []
    if mode == FIXED:
        a = abs(alpha)
        if nu > src.radius:
            cands.append((a * gb.minmod_lower * (nu - src.radius) - nv, "minmod"))
        cands.append((nv - a * gb.opnorm_upper * (nu + src.radius), "opnorm"))
    else:
        # any |alpha| <= 1 obeys the image-norm bound; the minimum-modulus
        # bound dies as alpha -> 0 and cannot certify disk-scaled problems
        cands.append((nv - gb.opnorm_upper * (nu + src.radius), "opnorm"))
    if not cands:
        return None
    return max(cands, key=lambda t: t[0])


def certify_miss(p: HitProblem) -> CertifiedMiss | None:
    """Growth-bound certificate that no feasible (alpha, z) hits at p.n.

    Returns the strongest certificate over components, or None.  Valid for
    shift/diagonal/scalar components; dense components are never certified.
    """
    best: CertifiedMiss | None = None
    best_margin = 0.0
    for i, op in enumerate(p.components):
        src, tgt = p.sources.balls[i], p.targets.balls[i]
        alpha = p.fixed_alphas[i] if p.mode == FIXED else None
        got = _component_bounds(op, p.n, src, tgt, p.mode, alpha)
        if got is None:
            continue
        lb, kind = got
        margin = lb - tgt.radius
        if margin >= p.settings.cert_margin and margin > best_margin:
            best = CertifiedMiss(lower_bound=lb, component=i, bound_kind=kind)
            best_margin = margin
    return best


@dataclass
class _ComponentSolve:
    hit: bool
    alpha: complex
    z: ComplexVector | None
    residual: float
    max_kkt: float


def _criterion_scalar(op, n, src: Ball, tgt: Ball, settings) -> tuple[complex, ComplexVector] | None:
    """Scalar lambda_n = sqrt(||S^n v|| / ||T^n u||) and the seed u + (1/lambda) S^n v."""
    try:
        s = right_inverse(op)
    except OperatorError:
        return None
    u, v = src.center, tgt.center
    try:
        ensure_power_fits(op, n, u)
        ensure_power_fits(s, n, v)
    except WindowGuardError:
        return None
    tn_u = power_apply(op, n, u)
    sn_v = power_apply(s, n, v)
    tu, sv = norm(tn_u), norm(sn_v)
    lam = math.sqrt(sv / tu) if tu > 0 and sv > 0 else 1.0
    lam = min(lam, 1.0)
    if lam == 0.0:
        # underflowed ratio; any nonzero scalar is legal, zero is not
        lam = settings.alpha_floor
    seed = u + sn_v * (1.0 / lam)
    return complex(lam), seed


_GRID_MODULI = (0.125, 0.25, 0.375, 0.5, 0.625, 0.75, 0.875, 1.0)
_GRID_PHASES = 8


def _solve_component(
    op: OperatorSpec,
    n: int,
    src: Ball,
    tgt: Ball,
    mode: str,
    fixed_alpha: complex | None,
    settings: SolverSettings,
    extra_seeds: Sequence[ComplexVector] = (),
) -> _ComponentSolve:
    window = src.center.window
    u, v = src.center, tgt.center
    eps_eff = src.radius * (1.0 - settings.strict_margin)
    delta = tgt.radius
    hit_level = delta - settings.residual_slack

    best = _ComponentSolve(hit=False, alpha=1.0 + 0j, z=None, residual=math.inf, max_kkt=0.0)

    def track(alpha: complex, z: ComplexVector, residual: float, kkt: float = 0.0) -> bool:
        best.max_kkt = max(best.max_kkt, kkt)
        if residual < best.residual:
            best.residual = residual
            best.alpha = alpha
            best.z = z
        if residual < hit_level:
            best.hit = True
            best.alpha = alpha
            best.z = z
            best.residual = residual
            return True
        return False

    def pinned(alpha: complex) -> bool:
        sol = constrained_lsq(power_map(op, n, window, alpha), u, eps_eff, v)
        return track(alpha, sol.z, sol.residual, sol.kkt_residual)

    def alternate(z0: ComplexVector) -> bool:
        z = z0
        prev = math.inf
        for _ in range(settings.max_iters):
            w = power_apply(op, n, z)
            alpha = fixed_alpha if mode == FIXED else best_alpha(w, v, settings.alpha_floor)
            if norm(z - u) < src.radius and track(alpha, z, norm(w * alpha - v)):
                return True
            sol = constrained_lsq(power_map(op, n, window, alpha), u, eps_eff, v)
            if track(alpha, sol.z, sol.residual, sol.kkt_residual):
                return True
            if abs(prev - sol.residual) <= settings.stall_eps * max(1.0, abs(prev)):
                break
            prev = sol.residual
            z = sol.z
        return False

    if mode == FIXED:
        pinned(fixed_alpha)
        for seed in extra_seeds:
            if best.hit:
                break
            alternate(seed)
        return best

    crit = _criterion_scalar(op, n, src, tgt, settings)
    # criterion-pinned scalar first: where it hits, the recorded alpha is the
    # construction's lambda_n, not a refit
    if crit is not None and pinned(crit[0]):
        return best
    if pinned(1.0 + 0j):
        return best
    if alternate(u):
        return best
    if crit is not None and alternate(crit[1]):
        return best
    for seed in extra_seeds:
        if alternate(seed):
            return best
    # the z-subproblem at fixed alpha is convex and solved exactly, so the
    # joint landscape is nonconvex only through alpha; a coarse disk grid
    # plus one polish escapes alternation stalls
    for mod in _GRID_MODULI:
        for j in range(_GRID_PHASES):
            angle = 2.0 * math.pi * j / _GRID_PHASES
            if pinned(mod * complex(math.cos(angle), math.sin(angle))):
                return best
    if best.z is not None:
        alternate(best.z)
    return best


def solve_hit(p: HitProblem, seeds: Sequence[ProductVector] | None = None) -> HitResult:
    """Solve the joint hit problem; the product structure separates by component."""
    cert = certify_miss(p)
    if cert is not None:
        return HitResult(
            status=MISS_CERTIFIED,
            lower_bound=cert.lower_bound,
            certified_component=cert.component,
            bound_kind=cert.bound_kind,
        )
    k = len(p.components)
    seed_lists: list[list[ComplexVector]] = [[] for _ in range(k)]
    if seeds:
        for pv in seeds:
            if pv.arity != k:
                raise ValueError("seed arity does not match the problem")
            for i, part in enumerate(pv.parts):
                seed_lists[i].append(part)
    solves = [
        _solve_component(
            op,
            p.n,
            p.sources.balls[i],
            p.targets.balls[i],
            p.mode,
            p.fixed_alphas[i] if p.mode == FIXED else None,
            p.settings,
            seed_lists[i],
        )
        for i, op in enumerate(p.components)
    ]
    max_kkt = max(s.max_kkt for s in solves)
    if all(s.hit for s in solves):
        witness = Witness(
            n=p.n,
            alphas=tuple(s.alpha for s in solves),
            point=ProductVector(tuple(s.z for s in solves)),
            residuals=tuple(s.residual for s in solves),
        )
        return HitResult(status=HIT, witness=witness, max_kkt_residual=max_kkt)
    return HitResult(
        status=MISS_UNCERTAIN,
        best_residuals=tuple(s.residual for s in solves),
        best_alphas=tuple(s.alpha for s in solves),
        max_kkt_residual=max_kkt,
    )


@dataclass(frozen=True)
class SearchReport:
    best_residuals: tuple[float, ...]
    best_alphas: tuple[complex, ...]
    hits: tuple[bool, ...]  # found residual < target radius, per component


def random_search(p: HitProblem, samples: int, seed, batch: int = 20000) -> SearchReport:
    """Brute-force feasible sampling oracle for the hit problem.

    Draws (alpha, z) with z strictly inside each source ball and alpha uniform
    on the disk (or pinned in fixed mode); reports the best residual seen per
    component.  Sound but not sharp: it never proves a miss, only fails to
    find a hit.
    """
    rng = as_rng(seed)
    k = len(p.components)
    best_res = [math.inf] * k
    best_alpha_found = [1.0 + 0j] * k
    for i, op in enumerate(p.components):
        src, tgt = p.sources.balls[i], p.targets.balls[i]
        window = src.center.window
        d = window.dim
        pmap = power_map(op, p.n, window, 1.0)
        center = src.center.coeffs
        vt = tgt.center.coeffs
        left = samples
        while left > 0:
            b = min(batch, left)
            left -= b
            dirs = rng.standard_normal((b, d)) + 1j * rng.standard_normal((b, d))
            norms = np.linalg.norm(dirs, axis=1)
            norms[norms == 0] = 1.0
            radii = src.radius * rng.uniform(size=b) ** (1.0 / (2 * d)) * (1.0 - 1e-12)
            z_block = center + dirs * (radii / norms)[:, None]
            w_block = pmap.apply_batch(z_block)
            if p.mode == FIXED:
                alphas = np.full(b, p.fixed_alphas[i], dtype=np.complex128)
            else:
                mags = np.sqrt(rng.uniform(size=b))
                alphas = mags * np.exp(2j * np.pi * rng.uniform(size=b))
            res = np.linalg.norm(alphas[:, None] * w_block - vt, axis=1)
            j = int(np.argmin(res))
            if res[j] < best_res[i]:
                best_res[i] = float(res[j])
                best_alpha_found[i] = complex(alphas[j])
    return SearchReport(
        best_residuals=tuple(best_res),
        best_alphas=tuple(best_alpha_found),
        hits=tuple(best_res[i] < p.targets.balls[i].radius for i in range(k)),
    )


def reverify_witness(p: HitProblem, w: Witness, pad: int | None = None) -> float:
    """Recompute witness residuals on an enlarged window; return the largest
    absolute deviation from the recorded values.  Also re-checks membership."""
    devs = []
    for i, op in enumerate(p.components):
        src, tgt = p.sources.balls[i], p.targets.balls[i]
        z = w.point.parts[i]
        if norm(z - src.center) >= src.radius:
            raise AssertionError("witness point is not strictly inside its source ball")
        if isinstance(op, (ForwardShift, BackwardShift)):
            # shifts move mass: recompute where the window edge cannot interfere
            old = z.window
            grow = pad if pad is not None else p.n
            big = IndexWindow(old.kind, old.m + grow)
            zi, vi = _embed(z, big), _embed(tgt.center, big)
        else:
            zi, vi = z, tgt.center
        res = norm(power_apply(op, p.n, zi) * w.alphas[i] - vi)
        devs.append(abs(res - w.residuals[i]))
    return max(devs)


def _embed(x: ComplexVector, window: IndexWindow) -> ComplexVector:
    out = np.zeros(window.dim, dtype=np.complex128)
    old = x.window
    out[old.lo - window.lo : old.lo - window.lo + old.dim] = x.coeffs
    return ComplexVector(window, out)
