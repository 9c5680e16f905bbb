"""Randomization designs and their first-order dependence structure.

A design is a probability distribution over complete assignment vectors
for n units and k arms.  Everything downstream is indexed arm-major:
arm r and unit i (0-based) live at flat position r*n + i, so stacked
vectors have length kn and joint matrices are kn x kn.

Probabilities for the combinatorial families (bernoulli, complete,
paired, block, cluster, enumerated custom) are kept as exact rationals
and converted to floats only when matrices are assembled.  That is what
makes entries like -1/3 or exact -1 reproducible bit-for-bit.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Iterator, Sequence

import numpy as np

from .errors import (
    InfeasibleSpecError,
    LayoutMismatchError,
    NonIdentifiedDesignError,
    SupportOverflowError,
    ValidationError,
)

DEFAULT_SUPPORT_CAP = 10**6

FracMatrix = list[list[Fraction]]


@dataclass(frozen=True)
class IndexLayout:
    """Arm-major flat indexing for stacked kn vectors.

    Arm r and unit i (both 0-based) map to flat index r*n + i: the first
    n coordinates belong to arm 0, the next n to arm 1, and so on.
    """

    k: int
    n: int

    def __post_init__(self):
        if self.k < 2:
            raise InfeasibleSpecError(f"arm count k must be >= 2, got {self.k}")
        if self.n < 1:
            raise InfeasibleSpecError(f"unit count n must be >= 1, got {self.n}")

    @property
    def kn(self) -> int:
        return self.k * self.n

    def flat(self, arm: int, unit: int) -> int:
        return arm * self.n + unit

    def arm_of(self, a: int) -> int:
        return a // self.n

    def unit_of(self, a: int) -> int:
        return a % self.n

    def check_vector(self, v: np.ndarray, what: str = "vector") -> np.ndarray:
        v = np.asarray(v, dtype=float)
        if v.shape != (self.kn,):
            raise LayoutMismatchError(
                f"{what} must have shape ({self.kn},) for k={self.k}, n={self.n}; "
                f"got {v.shape}"
            )
        return v

    def check_matrix(self, m: np.ndarray, what: str = "matrix") -> np.ndarray:
        m = np.asarray(m, dtype=float)
        if m.shape != (self.kn, self.kn):
            raise LayoutMismatchError(
                f"{what} must have shape ({self.kn}, {self.kn}) for k={self.k}, "
                f"n={self.n}; got {m.shape}"
            )
        return m


def arms_to_indicators(arms: np.ndarray, layout: IndexLayout) -> np.ndarray:
    """0/1 indicator vector of length kn from an arm-per-unit vector."""
    arms = np.asarray(arms, dtype=int)
    ind = np.zeros(layout.kn)
    ind[arms * layout.n + np.arange(layout.n)] = 1.0
    return ind


@dataclass(frozen=True, eq=False)
class Assignment:
    """One complete assignment: every unit in exactly one arm."""

    layout: IndexLayout
    arms: np.ndarray  # length n, values in 0..k-1

    def __post_init__(self):
        arms = np.asarray(self.arms, dtype=int)
        object.__setattr__(self, "arms", arms)
        if arms.shape != (self.layout.n,):
            raise LayoutMismatchError(
                f"assignment must give one arm per unit, expected length "
                f"{self.layout.n}, got shape {arms.shape}"
            )
        if arms.min() < 0 or arms.max() >= self.layout.k:
            raise ValidationError("assignment arm indices must lie in [0, k)")

    @classmethod
    def from_indicators(cls, layout: IndexLayout, indicators: np.ndarray) -> "Assignment":
        ind = layout.check_vector(indicators, "indicator vector")
        if not np.all((ind == 0.0) | (ind == 1.0)):
            raise ValidationError("indicators must be 0/1")
        mat = ind.reshape(layout.k, layout.n)
        if not np.all(mat.sum(axis=0) == 1.0):
            raise ValidationError("each unit must be assigned to exactly one arm")
        return cls(layout, np.argmax(mat, axis=0))

    def indicators(self) -> np.ndarray:
        return arms_to_indicators(self.arms, self.layout)


@dataclass(eq=False)
class PiDiagonal:
    """Per-(arm, unit) inclusion probabilities (diagonal of the pi matrix)."""

    layout: IndexLayout
    probs: np.ndarray
    frac: list[Fraction] | None = None
    estimated: bool = False
    se: np.ndarray | None = None

    def __post_init__(self):
        self.probs = self.layout.check_vector(self.probs, "inclusion probabilities")
        if np.any(self.probs <= 0.0) or np.any(self.probs >= 1.0):
            bad = int(np.argmin(np.minimum(self.probs, 1.0 - self.probs)))
            raise NonIdentifiedDesignError(
                "non-identified design: inclusion probability at flat index "
                f"{bad} (arm {self.layout.arm_of(bad)}, unit {self.layout.unit_of(bad)}) "
                f"is {self.probs[bad]}, outside (0, 1)"
            )
        unit_sums = self.probs.reshape(self.layout.k, self.layout.n).sum(axis=0)
        if np.max(np.abs(unit_sums - 1.0)) > 1e-12:
            raise ValidationError(
                "per-unit inclusion probabilities must sum to 1 across arms"
            )


@dataclass(eq=False)
class JointProbMatrix:
    """Joint assignment probabilities: entry (a, b) is E[R_a R_b]."""

    layout: IndexLayout
    p: np.ndarray
    frac: FracMatrix | None = None
    estimated: bool = False
    se: np.ndarray | None = None

    def __post_init__(self):
        self.p = self.layout.check_matrix(self.p, "joint probability matrix")
        if np.max(np.abs(self.p - self.p.T)) != 0.0:
            raise ValidationError("joint probability matrix must be exactly symmetric")
        if np.any(self.p < 0.0) or np.any(self.p > 1.0):
            raise ValidationError("joint probabilities must lie in [0, 1]")


@dataclass(eq=False)
class DesignMatrix:
    """First-order design matrix: covariance of the inverse-probability
    weighted assignment indicators, normalized elementwise."""

    layout: IndexLayout
    d: np.ndarray
    frac: FracMatrix | None = None
    estimated: bool = False

    def __post_init__(self):
        self.d = self.layout.check_matrix(self.d, "design matrix")

    def block(self, r: int, s: int) -> np.ndarray:
        n = self.layout.n
        return self.d[r * n : (r + 1) * n, s * n : (s + 1) * n]


@dataclass(eq=False)
class ImpossibilityMask:
    """0/1 matrix marking pairs of assignments with joint probability zero."""

    layout: IndexLayout
    mask: np.ndarray

    def __post_init__(self):
        self.mask = np.asarray(self.mask)
        if self.mask.shape != (self.layout.kn, self.layout.kn):
            raise LayoutMismatchError("mask shape does not match layout")
        self.mask = (self.mask != 0).astype(float)


@dataclass(eq=False)
class Design:
    """A randomization design.

    In exact mode the full support is enumerated as (arms, probability)
    pairs with rational probabilities.  In monte-carlo mode assignments
    are drawn from a seeded sampler; built-in families still carry exact
    rational pi/p, so only support-dependent quantities need sampling.
    """

    layout: IndexLayout
    family: str
    mode: str  # "exact" | "mc"
    support: list[tuple[np.ndarray, Fraction]] | None = None
    sampler: Callable[[np.random.Generator], np.ndarray] | None = None
    mc_replicates: int = 10000
    seed: int | None = None
    pi_frac: list[Fraction] | None = None
    p_frac: FracMatrix | None = None
    support_size: int | None = None
    _empirical: tuple | None = field(default=None, repr=False)

    def __post_init__(self):
        if self.mode not in ("exact", "mc"):
            raise ValidationError(f"unknown design mode {self.mode!r}")
        if self.mode == "exact":
            if not self.support:
                raise ValidationError("exact mode requires an enumerated support")
            total = sum(p for _, p in self.support)
            if abs(float(total) - 1.0) > 1e-12:
                raise ValidationError(
                    f"support probabilities sum to {float(total)}, not 1"
                )
            for arms, prob in self.support:
                if float(prob) <= 0.0:
                    raise ValidationError("support probabilities must be positive")
                Assignment(self.layout, arms)  # validates shape and range
            if self.support_size is None:
                self.support_size = len(self.support)
        else:
            if self.sampler is None:
                raise ValidationError("monte-carlo mode requires a sampler")

    def draw(self, rng: np.random.Generator) -> np.ndarray:
        """Draw one assignment (arm-per-unit vector)."""
        if self.sampler is not None:
            return self.sampler(rng)
        probs = np.array([float(p) for _, p in self.support])
        idx = rng.choice(len(self.support), p=probs / probs.sum())
        return self.support[idx][0].copy()

    def assignments(self) -> Iterator[tuple[Assignment, Fraction]]:
        if self.support is None:
            raise ValidationError("design has no enumerated support")
        for arms, prob in self.support:
            yield Assignment(self.layout, arms), prob

    def support_arrays(self) -> tuple[np.ndarray, np.ndarray]:
        """Support as (S x kn indicator matrix, length-S float probabilities)."""
        if self.support is None:
            raise ValidationError("design has no enumerated support")
        n, kn = self.layout.n, self.layout.kn
        mat = np.zeros((len(self.support), kn))
        probs = np.empty(len(self.support))
        cols = np.arange(n)
        for s, (arms, prob) in enumerate(self.support):
            mat[s, arms * n + cols] = 1.0
            probs[s] = float(prob)
        return mat, probs


# ---------------------------------------------------------------------------
# rational helpers


def _as_fraction(x) -> Fraction:
    if isinstance(x, Fraction):
        return x
    if isinstance(x, str):
        return Fraction(x)
    if isinstance(x, (int, np.integer)):
        return Fraction(int(x))
    if isinstance(x, (float, np.floating)):
        return Fraction(float(x))  # exact binary value of the float
    raise ValidationError(f"cannot interpret {x!r} as a probability")


def _zeros_frac(kn: int) -> FracMatrix:
    zero = Fraction(0)
    return [[zero] * kn for _ in range(kn)]


def _frac_matrix_to_float(m: FracMatrix) -> np.ndarray:
    return np.array([[float(x) for x in row] for row in m])


# ---------------------------------------------------------------------------
# builders


def _maybe_enumerate(size: int, cap: int, mode: str, family: str):
    """Decide exact vs monte-carlo; raise on overflow without opt-in."""
    if mode == "mc":
        return False
    if size > cap:
        raise SupportOverflowError(
            f"{family} design has support size {size}, above the cap {cap}; "
            'pass mode="mc" (with a seed and replicate count) to sample instead'
        )
    return True


def bernoulli_design(
    probs,
    k: int | None = None,
    n: int | None = None,
    *,
    mode: str = "exact",
    support_cap: int = DEFAULT_SUPPORT_CAP,
    mc_replicates: int = 10000,
    seed: int | None = None,
) -> Design:
    """Independent per-unit assignment.

    ``probs`` may be a scalar (two arms, probability of arm 1), a length-k
    vector shared by all units, or an n x k matrix of per-unit arm
    probabilities.  Rows must sum to 1.
    """
    def _is_scalar(x) -> bool:
        return isinstance(x, (int, float, np.integer, np.floating, Fraction, str))

    if _is_scalar(probs):
        if k not in (None, 2):
            raise InfeasibleSpecError("scalar probability implies k=2")
        if n is None:
            raise InfeasibleSpecError("scalar probability requires explicit n")
        p1 = _as_fraction(probs)
        table = [[1 - p1, p1] for _ in range(n)]
        k = 2
    else:
        arr = list(probs)
        if not arr:
            raise InfeasibleSpecError("empty probability spec")
        if _is_scalar(arr[0]):
            # one length-k row shared across all units
            if n is None:
                raise InfeasibleSpecError("shared arm probabilities require explicit n")
            row = [_as_fraction(x) for x in arr]
            table = [list(row) for _ in range(n)]
        else:
            table = [[_as_fraction(x) for x in row] for row in arr]
            if n is not None and len(table) != n:
                raise InfeasibleSpecError("probs row count disagrees with n")
            n = len(table)
        k = len(table[0]) if k is None else int(k)
        if any(len(row) != k for row in table):
            raise InfeasibleSpecError("every probability row must have length k")
    layout = IndexLayout(k, n)
    for i, row in enumerate(table):
        if abs(float(sum(row)) - 1.0) > 1e-12:
            raise InfeasibleSpecError(f"arm probabilities for unit {i} do not sum to 1")
        if any(float(x) < 0 for x in row):
            raise InfeasibleSpecError("arm probabilities must be nonnegative")

    pi_frac = [table[i][r] for r in range(k) for i in range(n)]
    p_frac = _zeros_frac(layout.kn)
    for a in range(layout.kn):
        ra, ia = layout.arm_of(a), layout.unit_of(a)
        for b in range(a, layout.kn):
            rb, ib = layout.arm_of(b), layout.unit_of(b)
            if ia == ib:
                val = table[ia][ra] if ra == rb else Fraction(0)
            else:
                val = table[ia][ra] * table[ib][rb]
            p_frac[a][b] = p_frac[b][a] = val

    size = k**n
    support = None
    if _maybe_enumerate(size, support_cap, mode, "bernoulli"):
        support = []
        for arms in itertools.product(range(k), repeat=n):
            prob = math.prod((table[i][arms[i]] for i in range(n)), start=Fraction(1))
            if prob > 0:
                support.append((np.array(arms), prob))
        actual_mode = "exact"
    else:
        actual_mode = "mc"

    probs_float = np.array([[float(x) for x in row] for row in table])

    def sampler(rng: np.random.Generator) -> np.ndarray:
        u = rng.random(n)
        cum = np.cumsum(probs_float, axis=1)
        return (u[:, None] > cum).sum(axis=1)

    return Design(
        layout=layout,
        family="bernoulli",
        mode=actual_mode,
        support=support,
        sampler=sampler,
        mc_replicates=mc_replicates,
        seed=seed,
        pi_frac=pi_frac,
        p_frac=p_frac,
        support_size=size,
    )


def _multinomial(counts: Sequence[int]) -> int:
    total = math.factorial(sum(counts))
    for c in counts:
        total //= math.factorial(c)
    return total


def _multiset_arm_sequences(counts: Sequence[int]) -> Iterator[np.ndarray]:
    n = sum(counts)
    remaining = list(counts)
    arms = np.empty(n, dtype=int)

    def rec(pos: int) -> Iterator[np.ndarray]:
        if pos == n:
            yield arms.copy()
            return
        for r, c in enumerate(remaining):
            if c:
                remaining[r] -= 1
                arms[pos] = r
                yield from rec(pos + 1)
                remaining[r] += 1

    yield from rec(0)


def complete_design(
    counts: Sequence[int],
    *,
    mode: str = "exact",
    support_cap: int = DEFAULT_SUPPORT_CAP,
    mc_replicates: int = 10000,
    seed: int | None = None,
) -> Design:
    """Completely randomized assignment with fixed arm sizes."""
    counts = [int(c) for c in counts]
    if any(c < 0 for c in counts):
        raise InfeasibleSpecError("arm counts must be nonnegative")
    n = sum(counts)
    k = len(counts)
    layout = IndexLayout(k, n)

    nf = [Fraction(c) for c in counts]
    nn = Fraction(n)
    pi_frac = [nf[r] / nn for r in range(k) for _ in range(n)]
    p_frac = _zeros_frac(layout.kn)
    denom_pair = nn * (nn - 1)
    for a in range(layout.kn):
        ra, ia = layout.arm_of(a), layout.unit_of(a)
        for b in range(a, layout.kn):
            rb, ib = layout.arm_of(b), layout.unit_of(b)
            if ia == ib:
                val = nf[ra] / nn if ra == rb else Fraction(0)
            elif ra == rb:
                val = nf[ra] * (nf[ra] - 1) / denom_pair
            else:
                val = nf[ra] * nf[rb] / denom_pair
            p_frac[a][b] = p_frac[b][a] = val

    size = _multinomial(counts)
    support = None
    if _maybe_enumerate(size, support_cap, mode, "complete"):
        prob = Fraction(1, size)
        support = [(arms, prob) for arms in _multiset_arm_sequences(counts)]
        actual_mode = "exact"
    else:
        actual_mode = "mc"

    labels = np.repeat(np.arange(k), counts)

    def sampler(rng: np.random.Generator) -> np.ndarray:
        return rng.permutation(labels)

    return Design(
        layout=layout,
        family="complete",
        mode=actual_mode,
        support=support,
        sampler=sampler,
        mc_replicates=mc_replicates,
        seed=seed,
        pi_frac=pi_frac,
        p_frac=p_frac,
        support_size=size,
    )


def block_design(
    blocks: Sequence[tuple[Sequence[int], Design]],
    *,
    mode: str = "exact",
    support_cap: int = DEFAULT_SUPPORT_CAP,
    mc_replicates: int = 10000,
    seed: int | None = None,
) -> Design:
    """Independent sub-designs over disjoint unit sets.

    Marginal and joint probabilities are assembled blockwise (cross-block
    joints are products of marginals), so the product support never needs
    to be enumerated just to obtain pi, p, or the design matrix.
    """
    if not blocks:
        raise InfeasibleSpecError("block design needs at least one block")
    k = blocks[0][1].layout.k
    unit_sets = []
    for units, sub in blocks:
        if sub.layout.k != k:
            raise InfeasibleSpecError("all blocks must share the same arm count")
        units = [int(u) for u in units]
        if len(units) != sub.layout.n:
            raise InfeasibleSpecError(
                f"block lists {len(units)} units but its design has n={sub.layout.n}"
            )
        unit_sets.append(units)
    flat_units = sorted(u for us in unit_sets for u in us)
    n = len(flat_units)
    if flat_units != list(range(n)):
        raise InfeasibleSpecError(
            "block unit sets must be disjoint and cover units 0..n-1"
        )
    layout = IndexLayout(k, n)

    subs_exact = all(sub.pi_frac is not None and sub.p_frac is not None for _, sub in blocks)
    pi_frac = p_frac = None
    if subs_exact:
        pi_frac = [Fraction(0)] * layout.kn
        p_frac = _zeros_frac(layout.kn)
        for units, sub in blocks:
            for r in range(k):
                for li, u in enumerate(units):
                    pi_frac[layout.flat(r, u)] = sub.pi_frac[sub.layout.flat(r, li)]
        for units, sub in blocks:
            for r in range(k):
                for s in range(k):
                    for li, u in enumerate(units):
                        for lj, v in enumerate(units):
                            p_frac[layout.flat(r, u)][layout.flat(s, v)] = sub.p_frac[
                                sub.layout.flat(r, li)
                            ][sub.layout.flat(s, lj)]
        for bi in range(len(blocks)):
            for bj in range(bi + 1, len(blocks)):
                for r in range(k):
                    for u in blocks[bi][0]:
                        a = layout.flat(r, u)
                        for s in range(k):
                            for v in blocks[bj][0]:
                                b = layout.flat(s, v)
                                val = pi_frac[a] * pi_frac[b]
                                p_frac[a][b] = p_frac[b][a] = val

    sizes = [sub.support_size for _, sub in blocks]
    size = math.prod(sizes) if all(s is not None for s in sizes) else None
    support = None
    actual_mode = "mc"
    if size is not None and all(sub.support is not None for _, sub in blocks):
        if _maybe_enumerate(size, support_cap, mode, "block"):
            support = []
            for combo in itertools.product(*(sub.support for _, sub in blocks)):
                arms = np.empty(n, dtype=int)
                prob = Fraction(1)
                for (units, _), (sub_arms, sub_prob) in zip(blocks, combo):
                    arms[np.asarray(units, dtype=int)] = sub_arms
                    prob *= sub_prob
                support.append((arms, prob))
            actual_mode = "exact"
    elif mode == "exact":
        raise SupportOverflowError(
            "cannot enumerate block design support; sub-designs are not all exact"
        )

    def sampler(rng: np.random.Generator) -> np.ndarray:
        arms = np.empty(n, dtype=int)
        for units, sub in blocks:
            arms[np.asarray(units, dtype=int)] = sub.draw(rng)
        return arms

    return Design(
        layout=layout,
        family="block",
        mode=actual_mode,
        support=support,
        sampler=sampler,
        mc_replicates=mc_replicates,
        seed=seed,
        pi_frac=pi_frac,
        p_frac=p_frac,
        support_size=size,
    )


def paired_design(
    pairs: Sequence[Sequence[int]],
    k: int = 2,
    *,
    mode: str = "exact",
    support_cap: int = DEFAULT_SUPPORT_CAP,
    mc_replicates: int = 10000,
    seed: int | None = None,
) -> Design:
    """Matched groups of size k; within each group one unit goes to each arm."""
    for pair in pairs:
        if len(pair) != k:
            raise InfeasibleSpecError(
                f"each matched group must have exactly k={k} units, got {list(pair)}"
            )
    blocks = [
        (list(pair), complete_design([1] * k, support_cap=support_cap))
        for pair in pairs
    ]
    design = block_design(
        blocks,
        mode=mode,
        support_cap=support_cap,
        mc_replicates=mc_replicates,
        seed=seed,
    )
    design.family = "paired"
    return design


def cluster_design(
    clusters: Sequence[Sequence[int]],
    cluster_level: Design,
    *,
    support_cap: int = DEFAULT_SUPPORT_CAP,
    mc_replicates: int | None = None,
    seed: int | None = None,
) -> Design:
    """All units in a cluster share the arm drawn for the cluster."""
    m = len(clusters)
    if cluster_level.layout.n != m:
        raise InfeasibleSpecError(
            f"cluster-level design has n={cluster_level.layout.n}, expected {m} clusters"
        )
    k = cluster_level.layout.k
    flat_units = sorted(u for cl in clusters for u in cl)
    n = len(flat_units)
    if flat_units != list(range(n)):
        raise InfeasibleSpecError("clusters must be disjoint and cover units 0..n-1")
    layout = IndexLayout(k, n)
    group = np.empty(n, dtype=int)
    for g, cl in enumerate(clusters):
        group[np.asarray(cl, dtype=int)] = g

    pi_frac = p_frac = None
    if cluster_level.pi_frac is not None and cluster_level.p_frac is not None:
        cl_layout = cluster_level.layout
        pi_frac = [
            cluster_level.pi_frac[cl_layout.flat(r, group[i])]
            for r in range(k)
            for i in range(n)
        ]
        p_frac = _zeros_frac(layout.kn)
        for a in range(layout.kn):
            ra, ia = layout.arm_of(a), layout.unit_of(a)
            ca = cl_layout.flat(ra, group[ia])
            for b in range(a, layout.kn):
                rb, ib = layout.arm_of(b), layout.unit_of(b)
                val = cluster_level.p_frac[ca][cl_layout.flat(rb, group[ib])]
                p_frac[a][b] = p_frac[b][a] = val

    support = None
    if cluster_level.support is not None:
        support = [
            (np.asarray(cl_arms, dtype=int)[group], prob)
            for cl_arms, prob in cluster_level.support
        ]

    def sampler(rng: np.random.Generator) -> np.ndarray:
        return cluster_level.draw(rng)[group]

    return Design(
        layout=layout,
        family="cluster",
        mode=cluster_level.mode,
        support=support,
        sampler=sampler,
        mc_replicates=mc_replicates or cluster_level.mc_replicates,
        seed=seed if seed is not None else cluster_level.seed,
        pi_frac=pi_frac,
        p_frac=p_frac,
        support_size=cluster_level.support_size,
    )


def custom_design(
    layout: IndexLayout,
    support: Sequence[tuple[Sequence[int], object]] | None = None,
    sampler: Callable[[np.random.Generator], np.ndarray] | None = None,
    *,
    support_cap: int = DEFAULT_SUPPORT_CAP,
    mc_replicates: int = 10000,
    seed: int | None = None,
) -> Design:
    """Design given directly by an enumerated support or by a sampler.

    Enumerated supports get exact rational pi and p.  Sampler-only designs
    fall back to seeded empirical moments, and everything derived from them
    is flagged as estimated.
    """
    if support is None and sampler is None:
        raise InfeasibleSpecError("custom design needs a support or a sampler")
    pi_frac = p_frac = None
    sup = None
    if support is not None:
        if len(support) > support_cap:
            raise SupportOverflowError(
                f"custom support has {len(support)} points, above the cap {support_cap}"
            )
        sup = [
            (np.asarray(arms, dtype=int), _as_fraction(prob)) for arms, prob in support
        ]
        kn, n = layout.kn, layout.n
        pi_frac = [Fraction(0)] * kn
        p_frac = _zeros_frac(kn)
        cols = np.arange(n)
        for arms, prob in sup:
            flat = arms * n + cols
            for a in flat:
                pi_frac[a] += prob
            for a in flat:
                row = p_frac[a]
                for b in flat:
                    row[b] += prob
    return Design(
        layout=layout,
        family="custom",
        mode="exact" if sup is not None else "mc",
        support=sup,
        sampler=sampler,
        mc_replicates=mc_replicates,
        seed=seed,
        pi_frac=pi_frac,
        p_frac=p_frac,
        support_size=len(sup) if sup is not None else None,
    )


def build_design(spec: dict, *, support_cap: int | None = None) -> Design:
    """Build a design from its JSON-shaped description.

    See docs/formats.md for the schema.  ``support_cap`` overrides the
    spec's own "support_cap" field when given.
    """
    if not isinstance(spec, dict):
        raise ValidationError("design spec must be a JSON object")
    spec = dict(spec)
    family = spec.get("type")
    cap = support_cap if support_cap is not None else int(spec.get("support_cap", DEFAULT_SUPPORT_CAP))
    mode = spec.get("mode", "exact")
    common = dict(
        mode=mode,
        support_cap=cap,
        mc_replicates=int(spec.get("mc_replicates", 10000)),
        seed=spec.get("seed"),
    )
    if family == "bernoulli":
        probs = spec.get("probs", spec.get("p"))
        if probs is None:
            raise InfeasibleSpecError('bernoulli spec needs "p" or "probs"')
        return bernoulli_design(probs, k=spec.get("k"), n=spec.get("n"), **common)
    if family == "complete":
        counts = spec.get("counts")
        if counts is None:
            raise InfeasibleSpecError('complete spec needs "counts" per arm')
        d = complete_design(counts, **common)
        if "n" in spec and int(spec["n"]) != d.layout.n:
            raise InfeasibleSpecError(
                f"complete design arm counts sum to {d.layout.n}, not n={spec['n']}"
            )
        return d
    if family == "paired":
        pairs = spec.get("pairs")
        if pairs is None:
            raise InfeasibleSpecError('paired spec needs "pairs"')
        return paired_design(pairs, k=int(spec.get("k", 2)), **common)
    if family == "block":
        subs = spec.get("blocks")
        if not subs:
            raise InfeasibleSpecError('block spec needs a nonempty "blocks" list')
        built = []
        for sub in subs:
            sub = dict(sub)
            units = sub.pop("units", None)
            if units is None:
                raise InfeasibleSpecError('each block needs a "units" list')
            sub.setdefault("n", len(units))
            if "k" not in sub and spec.get("k") is not None:
                sub["k"] = spec["k"]
            built.append((units, build_design(sub, support_cap=cap)))
        return block_design(built, **common)
    if family == "cluster":
        clusters = spec.get("clusters")
        sub = spec.get("cluster_design")
        if clusters is None or sub is None:
            raise InfeasibleSpecError('cluster spec needs "clusters" and "cluster_design"')
        sub = dict(sub)
        sub.setdefault("n", len(clusters))
        if "k" not in sub and spec.get("k") is not None:
            sub["k"] = spec["k"]
        sub.setdefault("mode", mode)
        sub.setdefault("mc_replicates", common["mc_replicates"])
        sub.setdefault("seed", common["seed"])
        cl = build_design(sub, support_cap=cap)
        return cluster_design(clusters, cl, support_cap=cap, seed=common["seed"])
    if family == "custom":
        sup = spec.get("support")
        if sup is None:
            raise InfeasibleSpecError('custom spec needs a "support" list')
        layout = IndexLayout(int(spec["k"]), int(spec["n"]))
        parsed = [(entry["arms"], entry["prob"]) for entry in sup]
        return custom_design(layout, parsed, support_cap=cap,
                             mc_replicates=common["mc_replicates"], seed=common["seed"])
    raise InfeasibleSpecError(f"unknown design type {family!r}")


# ---------------------------------------------------------------------------
# moments


def _empirical_moments(design: Design) -> tuple:
    if design._empirical is not None:
        return design._empirical
    if design.seed is None:
        raise ValidationError(
            "monte-carlo moment estimation requires an explicit seed"
        )
    reps = design.mc_replicates
    kn = design.layout.kn
    pi_sum = np.zeros(kn)
    p_sum = np.zeros((kn, kn))
    chunk = 4096
    done = 0
    while done < reps:
        take = min(chunk, reps - done)
        mat = np.empty((take, kn))
        for j in range(take):
            rng = np.random.default_rng((design.seed, done + j))
            mat[j] = arms_to_indicators(design.draw(rng), design.layout)
        pi_sum += mat.sum(axis=0)
        p_sum += mat.T @ mat
        done += take
    pi_hat = pi_sum / reps
    p_hat = p_sum / reps
    pi_se = np.sqrt(np.clip(pi_hat * (1 - pi_hat), 0, None) / reps)
    p_se = np.sqrt(np.clip(p_hat * (1 - p_hat), 0, None) / reps)
    design._empirical = (pi_hat, p_hat, pi_se, p_se)
    return design._empirical


def inclusion_probabilities(design: Design) -> PiDiagonal:
    """Marginal assignment probabilities, exact where the family allows."""
    if design.pi_frac is not None:
        probs = np.array([float(x) for x in design.pi_frac])
        return PiDiagonal(design.layout, probs, frac=list(design.pi_frac))
    pi_hat, _, pi_se, _ = _empirical_moments(design)
    return PiDiagonal(design.layout, pi_hat, estimated=True, se=pi_se)


def joint_probabilities(design: Design) -> JointProbMatrix:
    """Joint assignment probabilities, exact where the family allows."""
    if design.p_frac is not None:
        p = _frac_matrix_to_float(design.p_frac)
        return JointProbMatrix(design.layout, p, frac=design.p_frac)
    _, p_hat, _, p_se = _empirical_moments(design)
    return JointProbMatrix(design.layout, p_hat, estimated=True, se=p_se)


def first_order_design_matrix(design: Design) -> tuple[DesignMatrix, ImpossibilityMask]:
    """Normalized covariance matrix of the weighted assignment indicators.

    Entry (a, b) is p_ab / (pi_a pi_b) - 1.  Impossible joint assignments
    (p_ab = 0, detected exactly, never by float comparison) carry exactly
    -1 and are reported in the companion mask.
    """
    pi = inclusion_probabilities(design)  # raises if non-identified
    p = joint_probabilities(design)
    kn = design.layout.kn
    if pi.frac is not None and p.frac is not None:
        d_frac = [
            [p.frac[a][b] / (pi.frac[a] * pi.frac[b]) - 1 for b in range(kn)]
            for a in range(kn)
        ]
        d = _frac_matrix_to_float(d_frac)
        mask = np.array(
            [[1.0 if p.frac[a][b] == 0 else 0.0 for b in range(kn)] for a in range(kn)]
        )
        return (
            DesignMatrix(design.layout, d, frac=d_frac),
            ImpossibilityMask(design.layout, mask),
        )
    outer = np.outer(pi.probs, pi.probs)
    d = p.p / outer - 1.0
    mask = (p.p == 0.0).astype(float)
    d[mask == 1.0] = -1.0
    return (
        DesignMatrix(design.layout, d, estimated=True),
        ImpossibilityMask(design.layout, mask),
    )
