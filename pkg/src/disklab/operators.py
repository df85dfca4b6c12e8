"""Weighted shifts, diagonal and dense operators, their powers and growth bounds.

Operators are symbolic: a spec carries weights or entries, and application
happens on a chosen window.  Shift powers drop mass that leaves the window;
scans that must not lose mass call ensure_power_fits first.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from .vectorspace import (
    BILATERAL,
    UNILATERAL,
    ComplexVector,
    IndexWindow,
    ProductVector,
    norm,
)

__all__ = [
    "WeightProfile",
    "OperatorSpec",
    "ForwardShift",
    "BackwardShift",
    "Diagonal",
    "Scalar",
    "Dense",
    "DirectSum",
    "EigenPair",
    "GrowthBounds",
    "OperatorError",
    "WindowGuardError",
    "apply",
    "power_apply",
    "right_inverse",
    "growth",
    "as_dense",
    "ensure_power_fits",
]


class OperatorError(ValueError):
    """Unsupported operator variant or invalid operator data."""


class WindowGuardError(RuntimeError):
    """A shift power would push recorded support outside the window."""


@dataclass(frozen=True)
class WeightProfile:
    """Weight at index m: table[m] if present, else pos for m >= 0, neg for m < 0."""

    pos: float
    neg: float
    table: Mapping[int, float] = field(default_factory=dict)

    def __post_init__(self):
        vals = [self.pos, self.neg, *self.table.values()]
        if any(not (v > 0) or not np.isfinite(v) for v in vals):
            raise OperatorError("shift weights must be positive and finite")
        object.__setattr__(self, "table", dict(self.table))

    def weight(self, m: int) -> float:
        w = self.table.get(m)
        if w is not None:
            return w
        return self.pos if m >= 0 else self.neg

    def weights_on(self, lo: int, hi: int) -> np.ndarray:
        """Weights at indices lo..hi inclusive."""
        return np.array([self.weight(m) for m in range(lo, hi + 1)], dtype=float)

    def reciprocal(self) -> "WeightProfile":
        return WeightProfile(
            pos=1.0 / self.pos,
            neg=1.0 / self.neg,
            table={k: 1.0 / v for k, v in self.table.items()},
        )


class OperatorSpec:
    """Marker base class for operator variants."""

    __slots__ = ()


@dataclass(frozen=True)
class ForwardShift(OperatorSpec):
    """e_n -> w(n) e_{n+1}."""

    weights: WeightProfile


@dataclass(frozen=True)
class BackwardShift(OperatorSpec):
    """e_n -> w(n-1) e_{n-1}; the weight is indexed by the target."""

    weights: WeightProfile


@dataclass(frozen=True)
class Diagonal(OperatorSpec):
    """e_n -> entries[n] e_n.  With default=None the table must cover every
    index actually touched; a numeric default fills the rest of the lattice."""

    entries: Mapping[int, complex]
    default: complex | None = None

    def __post_init__(self):
        object.__setattr__(self, "entries", {int(k): complex(v) for k, v in self.entries.items()})
        if self.default is not None:
            object.__setattr__(self, "default", complex(self.default))

    def entry(self, j: int) -> complex:
        if j in self.entries:
            return self.entries[j]
        if self.default is None:
            raise OperatorError(f"diagonal has no entry at index {j} and no default")
        return self.default

    def entries_on(self, window: IndexWindow) -> np.ndarray:
        return np.array([self.entry(j) for j in window.indices()], dtype=np.complex128)


@dataclass(frozen=True)
class Scalar(OperatorSpec):
    value: complex

    def __post_init__(self):
        object.__setattr__(self, "value", complex(self.value))


@dataclass(frozen=True)
class Dense(OperatorSpec):
    """Explicit matrix on the window, indexed like the coefficient array."""

    matrix: np.ndarray

    def __post_init__(self):
        arr = np.ascontiguousarray(self.matrix, dtype=np.complex128)
        if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
            raise OperatorError("dense operator needs a square matrix")
        arr.setflags(write=False)
        object.__setattr__(self, "matrix", arr)


@dataclass(frozen=True)
class DirectSum(OperatorSpec):
    components: tuple[OperatorSpec, ...]

    def __post_init__(self):
        if not self.components:
            raise OperatorError("direct sum needs at least one component")
        object.__setattr__(self, "components", tuple(self.components))


@dataclass(frozen=True)
class EigenPair:
    """Eigenvalue with a unit-normalized eigenvector is not required; any
    nonzero eigenvector is accepted."""

    value: complex
    vector: ComplexVector


@dataclass(frozen=True)
class GrowthBounds:
    """Operator-norm upper bound and minimum-modulus lower bound for the
    un-truncated power."""

    opnorm_upper: float
    minmod_lower: float


def _shift_products(profile: WeightProfile, starts: np.ndarray, n: int) -> np.ndarray:
    """Products w(j) w(j+1) ... w(j+n-1) for each start j (vectorized over j)."""
    if n == 0:
        return np.ones(starts.size, dtype=float)
    out = np.ones(starts.size, dtype=float)
    for t in range(n):
        out *= np.array([profile.weight(int(j) + t) for j in starts], dtype=float)
    return out


def _forward_power(profile: WeightProfile, n: int, x: ComplexVector) -> ComplexVector:
    window = x.window
    d = window.dim
    out = np.zeros(d, dtype=np.complex128)
    if n == 0:
        return ComplexVector(window, x.coeffs.copy())
    if n < d:
        # product over the source run [j, j+n) for each surviving source
        w = profile.weights_on(window.lo, window.hi - 1)
        prods = np.ones(d - n, dtype=float)
        for t in range(n):
            prods *= w[t : t + d - n]
        out[n:] = x.coeffs[: d - n] * prods
    return ComplexVector(window, out)


def _backward_power(profile: WeightProfile, n: int, x: ComplexVector) -> ComplexVector:
    window = x.window
    d = window.dim
    out = np.zeros(d, dtype=np.complex128)
    if n == 0:
        return ComplexVector(window, x.coeffs.copy())
    if n < d:
        # source j lands on j-n with weight product over [j-n, j-1]
        w = profile.weights_on(window.lo, window.hi - 1)
        prods = np.ones(d - n, dtype=float)
        for t in range(n):
            prods *= w[t : t + d - n]
        out[: d - n] = x.coeffs[n:] * prods
    return ComplexVector(window, out)


def power_apply(op: OperatorSpec, n: int, x):
    """Apply the n-th power of op.  n must be a nonnegative integer."""
    if n < 0 or int(n) != n:
        raise ValueError("power must be a nonnegative integer")
    n = int(n)
    if isinstance(op, DirectSum):
        if not isinstance(x, ProductVector) or x.arity != len(op.components):
            raise ValueError("direct sum expects a matching product vector")
        return ProductVector(tuple(power_apply(c, n, p) for c, p in zip(op.components, x.parts)))
    if not isinstance(x, ComplexVector):
        raise TypeError("expected a ComplexVector")
    if isinstance(op, ForwardShift):
        return _forward_power(op.weights, n, x)
    if isinstance(op, BackwardShift):
        return _backward_power(op.weights, n, x)
    if isinstance(op, Diagonal):
        diag = op.entries_on(x.window)
        return ComplexVector(x.window, x.coeffs * diag**n)
    if isinstance(op, Scalar):
        return ComplexVector(x.window, x.coeffs * op.value**n)
    if isinstance(op, Dense):
        if op.matrix.shape[0] != x.window.dim:
            raise OperatorError("dense matrix size does not match the window")
        m = np.linalg.matrix_power(op.matrix, n)
        return ComplexVector(x.window, m @ x.coeffs)
    raise OperatorError(f"unsupported operator variant {type(op).__name__}")


def apply(op: OperatorSpec, x):
    return power_apply(op, 1, x)


def right_inverse(op: OperatorSpec) -> OperatorSpec:
    """Map S with T^n S^n = identity wherever no mass leaves the window.

    Defined for forward shifts (backward shift with reciprocal weights),
    diagonal operators with nonzero entries, nonzero scalars, and direct sums
    of those.
    """
    if isinstance(op, ForwardShift):
        return BackwardShift(op.weights.reciprocal())
    if isinstance(op, Diagonal):
        if any(v == 0 for v in op.entries.values()) or op.default == 0:
            raise OperatorError("diagonal right inverse needs nonzero entries")
        default = None if op.default is None else 1.0 / op.default
        return Diagonal({k: 1.0 / v for k, v in op.entries.items()}, default)
    if isinstance(op, Scalar):
        if op.value == 0:
            raise OperatorError("zero scalar has no right inverse")
        return Scalar(1.0 / op.value)
    if isinstance(op, DirectSum):
        return DirectSum(tuple(right_inverse(c) for c in op.components))
    raise OperatorError(f"right inverse undefined for {type(op).__name__}")


def _profile_window_products(profile: WeightProfile, n: int, lattice: str) -> np.ndarray:
    """All distinct length-n running products of the weight sequence."""
    keys = list(profile.table.keys())
    lo_t = min(keys, default=0)
    hi_t = max(keys, default=0)
    lo_j = lo_t - n - 1
    hi_j = hi_t + 1
    if lattice == UNILATERAL:
        lo_j = max(lo_j, 0)
        hi_j = max(hi_j, 0)
    starts = np.arange(lo_j, hi_j + 1)
    cands = list(_shift_products(profile, starts, n))
    cands.append(profile.pos**n)  # far right
    if lattice == BILATERAL:
        cands.append(profile.neg**n)  # far left
    return np.array(cands, dtype=float)


def growth(op: OperatorSpec, n: int, lattice: str = BILATERAL) -> GrowthBounds:
    """(opnorm upper, minimum-modulus lower) bounds for the un-truncated n-th power.

    Exact for weighted shifts, diagonal, and scalar operators; dense and
    direct-sum variants are out of scope.
    """
    if n < 0 or int(n) != n:
        raise ValueError("power must be a nonnegative integer")
    n = int(n)
    if lattice not in (BILATERAL, UNILATERAL):
        raise ValueError(f"unknown lattice {lattice!r}")
    if n == 0:
        return GrowthBounds(1.0, 1.0)
    if isinstance(op, ForwardShift):
        prods = _profile_window_products(op.weights, n, lattice)
        return GrowthBounds(float(prods.max()), float(prods.min()))
    if isinstance(op, BackwardShift):
        prods = _profile_window_products(op.weights, n, lattice)
        if lattice == UNILATERAL:
            # e_0 .. e_{n-1} are annihilated
            keys = [k for k in op.weights.table if k >= 0]
            hi_t = max(keys, default=0)
            starts = np.arange(0, hi_t + n + 2)
            prods = _shift_products(op.weights, starts, n)
            prods = np.append(prods, op.weights.pos**n)
            return GrowthBounds(float(prods.max()), 0.0)
        return GrowthBounds(float(prods.max()), float(prods.min()))
    if isinstance(op, Diagonal):
        moduli = [abs(v) for v in op.entries.values()]
        if op.default is not None:
            moduli.append(abs(op.default))
        if not moduli:
            raise OperatorError("diagonal growth needs at least one entry")
        arr = np.array(moduli, dtype=float) ** n
        return GrowthBounds(float(arr.max()), float(arr.min()))
    if isinstance(op, Scalar):
        v = abs(op.value) ** n
        return GrowthBounds(v, v)
    raise OperatorError(f"growth bounds unavailable for {type(op).__name__}")


def as_dense(op: OperatorSpec, window: IndexWindow) -> np.ndarray:
    """Matrix of the truncated operator, acting on coefficient arrays.

    Direct sums produce a block-diagonal matrix on concatenated parts.
    """
    if isinstance(op, DirectSum):
        blocks = [as_dense(c, window) for c in op.components]
        d = window.dim
        out = np.zeros((d * len(blocks), d * len(blocks)), dtype=np.complex128)
        for i, b in enumerate(blocks):
            out[i * d : (i + 1) * d, i * d : (i + 1) * d] = b
        return out
    if isinstance(op, Dense):
        if op.matrix.shape[0] != window.dim:
            raise OperatorError("dense matrix size does not match the window")
        return op.matrix.copy()
    d = window.dim
    out = np.zeros((d, d), dtype=np.complex128)
    for j in range(d):
        e = np.zeros(d, dtype=np.complex128)
        e[j] = 1.0
        out[:, j] = apply(op, ComplexVector(window, e)).coeffs
    return out


def _support_for_guard(x) -> tuple[int, int] | None:
    if isinstance(x, ProductVector):
        bounds = [p.support_bounds() for p in x.parts]
        bounds = [b for b in bounds if b is not None]
        if not bounds:
            return None
        return min(b[0] for b in bounds), max(b[1] for b in bounds)
    return x.support_bounds()


def ensure_power_fits(op: OperatorSpec, n: int, x, window: IndexWindow | None = None):
    """Raise WindowGuardError if T^n x would shed mass at an artificial edge.

    Only shift variants move support.  The top of any window is an artificial
    cutoff, as is the bottom of a bilateral one; the bottom of a unilateral
    window is a true lattice boundary, where a backward shift genuinely
    annihilates, so no guard fires there.  For a DirectSum the check runs
    componentwise against the matching part of a product vector.
    """
    if isinstance(op, DirectSum):
        if isinstance(x, ProductVector):
            for c, p in zip(op.components, x.parts):
                ensure_power_fits(c, n, p, window)
        return
    if not isinstance(op, (ForwardShift, BackwardShift)):
        return
    bounds = _support_for_guard(x)
    if bounds is None:
        return
    win = window if window is not None else x.window
    lo_s, hi_s = bounds
    if isinstance(op, ForwardShift) and hi_s + n > win.hi:
        raise WindowGuardError(
            f"forward power {n} pushes support {hi_s} past window top {win.hi}"
        )
    if isinstance(op, BackwardShift) and win.kind == BILATERAL and lo_s - n < win.lo:
        raise WindowGuardError(
            f"backward power {n} pushes support {lo_s} past window bottom {win.lo}"
        )
