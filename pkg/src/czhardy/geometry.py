"""Admissible trapezoids, their envelopes (Calderon-Zygmund sets) and dilates.

A set "below ``root`` at relative depths ``lo..hi``" is a union of contiguous
index blocks, one per relative depth, so enumeration and integration are done
block by block.  Relative depth ``delta`` is ``level(root) - level(x)``.

Canonical ordering of trapezoids is ``(root index, h)`` with the degenerate
single-vertex trapezoid placed before the non-degenerate ``h = 1`` one.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property, lru_cache

import numpy as np

from .errors import ContainmentError, InvariantViolation
from .measure import WeightedMeasure, _qpow, mu_set
from .tree import TreeTruncation, Vertex


class _RootedLevels:
    """Shared machinery for sets below a root spanning a range of relative depths."""

    tree: TreeTruncation
    root: int
    h: int
    degenerate: bool

    @property
    def delta_range(self) -> tuple[int, int]:
        raise NotImplementedError

    @property
    def root_depth(self) -> int:
        return int(self.tree.depths[self.root])

    @property
    def width(self):
        """``q**level(root)``."""
        return _qpow(self.tree.q, int(self.tree.levels[self.root]))

    @property
    def fits(self) -> bool:
        return self.root_depth + self.delta_range[1] <= self.tree.depth

    def blocks(self, clip: bool = False) -> list[tuple[int, int, int]]:
        """``(start, stop, depth)`` index blocks, one per relative depth."""
        lo, hi = self.delta_range
        if not self.fits and not clip:
            raise ContainmentError(f"{self!r} exits the truncation (depth {self.tree.depth})")
        hi = min(hi, self.tree.depth - self.root_depth)
        out = []
        for k in range(lo, hi + 1):
            start, stop = self.tree.descendant_block(self.root, k)
            out.append((start, stop, self.root_depth + k))
        return out

    @cached_property
    def vertices(self) -> np.ndarray:
        """Vertex indices; raises ``ContainmentError`` if the set exits the truncation."""
        return self._collect(clip=False)

    @cached_property
    def vertices_in_tree(self) -> np.ndarray:
        """Intersection of the set with the truncation."""
        return self._collect(clip=True)

    def _collect(self, clip):
        blocks = self.blocks(clip=clip)
        if not blocks:
            return np.zeros(0, dtype=np.int64)
        arr = np.concatenate([np.arange(a, b, dtype=np.int64) for a, b, _ in blocks])
        arr.flags.writeable = False
        return arr

    def member_mask(self, indices) -> np.ndarray:
        idx = np.asarray(indices, dtype=np.int64)
        lo, hi = self.delta_range
        delta = self.tree.depths[idx] - self.root_depth
        ok = (delta >= lo) & (delta <= hi)
        anc = self.tree.ancestors[idx, self.root_depth]
        return ok & (anc == self.root)

    def __contains__(self, v: Vertex) -> bool:
        return bool(self.member_mask([self.tree.index(v)])[0])

    def to_json(self) -> dict:
        return {"root_word": self.tree.label(self.root), "h": self.h, "degenerate": self.degenerate}


@dataclass(frozen=True, eq=True)
class AdmissibleTrapezoid(_RootedLevels):
    """``{x below root : h <= delta < 2h}``, or the single vertex ``{root}``."""

    tree: TreeTruncation = field(compare=False, repr=False)
    root: int
    h: int = 1
    degenerate: bool = False

    def __post_init__(self):
        object.__setattr__(self, "root", self.tree.index(self.root))
        if self.degenerate:
            object.__setattr__(self, "h", 1)
        if self.h < 1:
            raise ValueError(f"height must be >= 1, got {self.h}")
        if not self.fits:
            raise ContainmentError(
                f"trapezoid at {self.tree.label(self.root)!r} with h={self.h} exits the truncation"
            )

    @property
    def delta_range(self):
        return (0, 0) if self.degenerate else (self.h, 2 * self.h - 1)

    @property
    def measure(self):
        """``h * w``; every relative depth below the root carries mass ``w``."""
        return self.h * self.width

    @property
    def key(self) -> tuple[int, int]:
        return (self.root, 0 if self.degenerate else self.h)

    def envelope(self, allow_partial: bool = False) -> "CZSet":
        return envelope(self, allow_partial=allow_partial)


@dataclass(frozen=True, eq=True)
class CZSet(_RootedLevels):
    """Envelope ``{x below root : h/2 <= delta < 4h}``; ``{root}`` when degenerate.

    ``h/2 <= delta`` is read over the integers as ``delta >= ceil(h/2)``.  The
    object describes the set on the infinite tree: ``measure`` is the analytic
    value even when the set only partially fits (see ``vertices_in_tree``).
    """

    tree: TreeTruncation = field(compare=False, repr=False)
    root: int
    h: int = 1
    degenerate: bool = False

    def __post_init__(self):
        object.__setattr__(self, "root", self.tree.index(self.root))
        if self.degenerate:
            object.__setattr__(self, "h", 1)
        if self.h < 1:
            raise ValueError(f"height must be >= 1, got {self.h}")

    @property
    def delta_range(self):
        return (0, 0) if self.degenerate else (math.ceil(self.h / 2), 4 * self.h - 1)

    @property
    def measure(self):
        lo, hi = self.delta_range
        return (hi - lo + 1) * self.width

    @property
    def dilate_radius(self) -> int:
        """Largest integer distance ``d`` with ``d < h/4``."""
        return math.ceil(self.h / 4) - 1

    def dilate(self) -> "DilatedCZSet":
        return DilatedCZSet(self)


@dataclass(frozen=True)
class DilatedCZSet:
    """``{x : d(x, base) < h/4}``.

    The dilation never climbs back to the root (``ceil(h/2) > ceil(h/4) - 1``),
    so it fits exactly when the base fits and has ``radius`` spare levels below.
    """

    base: CZSet

    def __post_init__(self):
        b = self.base
        if not b.fits or b.root_depth + b.delta_range[1] + self.radius > b.tree.depth:
            raise ContainmentError(f"dilate of {b!r} exits the truncation")

    @property
    def tree(self):
        return self.base.tree

    @property
    def radius(self) -> int:
        return self.base.dilate_radius

    @cached_property
    def vertices(self) -> np.ndarray:
        if self.radius == 0:
            return self.base.vertices
        return self.tree.neighborhood(self.base.vertices, self.radius)

    def member_mask(self, indices) -> np.ndarray:
        mask = np.zeros(self.tree.n, dtype=bool)
        mask[self.vertices] = True
        return mask[np.asarray(indices, dtype=np.int64)]


def envelope(R: AdmissibleTrapezoid, allow_partial: bool = False) -> CZSet:
    cz = CZSet(R.tree, R.root, R.h, R.degenerate)
    if not allow_partial and not cz.fits:
        raise ContainmentError(f"envelope of {R!r} exits the truncation")
    return cz


def enumerate_vertices(S) -> np.ndarray:
    """Vertex indices of a trapezoid, CZ set or dilate (must fit in the truncation)."""
    return S.vertices


# -- families ------------------------------------------------------------------


@lru_cache(maxsize=32)
def admissible_trapezoids(tree: TreeTruncation) -> tuple[AdmissibleTrapezoid, ...]:
    """All admissible trapezoids contained in the truncation, in canonical order."""
    out = []
    for r in range(tree.n):
        out.append(AdmissibleTrapezoid(tree, r, 1, True))
        room = tree.depth - int(tree.depths[r])
        for h in range(1, (room + 1) // 2 + 1):
            out.append(AdmissibleTrapezoid(tree, r, h))
    return tuple(out)


def trapezoids_within(cz: CZSet) -> list[AdmissibleTrapezoid]:
    """Admissible trapezoids contained in ``cz`` and in the truncation, canonical order."""
    tree = cz.tree
    if cz.degenerate:
        return [AdmissibleTrapezoid(tree, cz.root, 1, True)]
    lo, hi = cz.delta_range
    out = []
    bottom = tree.depth - cz.root_depth
    for k in range(0, min(hi, bottom) + 1):
        if k == 0:
            roots = [cz.root]
        else:
            a, b = tree.descendant_block(cz.root, k)
            roots = range(a, b)
        # k + h >= lo, k + 2h - 1 <= min(hi, bottom)
        h_lo = max(1, lo - k)
        h_hi = (min(hi, bottom) - k + 1) // 2
        for r in roots:
            if lo <= k:
                out.append(AdmissibleTrapezoid(tree, r, 1, True))
            for h in range(h_lo, h_hi + 1):
                out.append(AdmissibleTrapezoid(tree, r, h))
    out.sort(key=lambda R: R.key)
    return out


def cz_sets(tree: TreeTruncation, include_degenerate: bool = True, interior: bool = False) -> list[CZSet]:
    """CZ sets that fit in the truncation; ``interior`` also requires the dilate to fit."""
    out = []
    for r in range(tree.n):
        room = tree.depth - int(tree.depths[r])
        if include_degenerate:
            out.append(CZSet(tree, r, 1, True))
        h = 1
        while 4 * h - 1 <= room:
            cz = CZSet(tree, r, h)
            if not interior or 4 * h - 1 + cz.dilate_radius <= room:
                out.append(cz)
            h += 1
    return out


def smallest_cz_set(tree: TreeTruncation, indices) -> CZSet | None:
    """Smallest-measure CZ set (rooted in the truncation) containing the given vertices.

    The set may extend below the truncation; ties go to the deepest root.
    Returns ``None`` when no such set exists (e.g. the apex together with
    other vertices).
    """
    idx = np.unique(np.asarray(indices, dtype=np.int64))
    if idx.size == 0:
        return None
    if idx.size == 1:
        return CZSet(tree, int(idx[0]), 1, True)
    A = tree.ancestors
    dmin = int(tree.depths[idx].min())
    col = A[idx, : dmin + 1]
    same = np.all(col == col[0], axis=0)
    lca_depth = int(np.argmin(same)) - 1 if not same.all() else dmin
    lca = int(col[0, lca_depth])
    best = None
    r, k = lca, lca_depth
    while True:
        rel = tree.depths[idx] - k
        lo_need, hi_need = int(rel.min()), int(rel.max())
        if lo_need >= 1:
            h = max(1, math.ceil((hi_need + 1) / 4))
            if math.ceil(h / 2) <= lo_need:
                cz = CZSet(tree, r, h)
                if best is None or cz.measure < best.measure:
                    best = cz
        if r == 0:
            break
        r, k = int(tree.parent[r]), k - 1
    return best


# -- executable geometric lemmas -------------------------------------------------


def envelope_measure_bound_check(R: AdmissibleTrapezoid, m: WeightedMeasure | None = None) -> bool:
    """Exact check of ``mu(envelope) <= 4 mu(R)`` by enumeration."""
    m = m or WeightedMeasure(R.tree)
    cz = envelope(R)
    mu_env, mu_r = mu_set(m, cz.vertices), mu_set(m, R.vertices)
    if not mu_env <= 4 * mu_r:
        raise InvariantViolation("envelope measure exceeds 4 mu(R)", R.to_json())
    return True


def inclusion_lemma_check(R1: AdmissibleTrapezoid, R2: AdmissibleTrapezoid) -> bool:
    """``R1 & R2 != {} and w(R1) >= w(R2)  ==>  R2 <= envelope(R1)``."""
    v2 = R2.vertices
    if not R1.member_mask(v2).any() or R1.width < R2.width:
        return True
    cz = CZSet(R1.tree, R1.root, R1.h, R1.degenerate)
    return bool(cz.member_mask(v2).all())


def diameter(tree: TreeTruncation, vertices) -> int:
    v = np.asarray(vertices, dtype=np.int64)
    if v.size <= 1:
        return 0
    return max(int(tree.distances_from(int(z), v).max()) for z in v)


def ball_inclusion_check(cz: CZSet) -> bool:
    """Every pair of points of ``cz`` is within ``8h - 2`` edges."""
    return diameter(cz.tree, cz.vertices) <= 8 * cz.h - 2


def dilate_measure_ratio(cz: CZSet, m: WeightedMeasure | None = None) -> Fraction:
    m = m or WeightedMeasure(cz.tree)
    return Fraction(mu_set(m, cz.dilate().vertices)) / Fraction(mu_set(m, cz.vertices))


def geometry_sweep(tree: TreeTruncation, pairs: int | None = None, seed: int = 0) -> dict:
    """Check trapezoid/envelope lemmas on a truncation.

    Every admissible trapezoid is checked for ``mu(R) = h w`` and the envelope
    bound; every fitting CZ set for the diameter bound.  Inclusion is checked
    on all ordered pairs when ``pairs`` is ``None``, else on ``pairs`` random
    pairs drawn so that they intersect (non-vacuous instances).
    Returns counts and a list of violating witnesses.
    """
    m = WeightedMeasure(tree)
    traps = admissible_trapezoids(tree)
    violations = []
    n_measure = n_envelope = 0
    for R in traps:
        n_measure += 1
        if mu_set(m, R.vertices) != R.h * R.width:
            violations.append({"check": "measure", **R.to_json()})
        cz = CZSet(tree, R.root, R.h, R.degenerate)
        if cz.fits:
            n_envelope += 1
            if not mu_set(m, cz.vertices) <= 4 * mu_set(m, R.vertices):
                violations.append({"check": "envelope", **R.to_json()})
    czs = cz_sets(tree)
    n_diam = 0
    for cz in czs:
        n_diam += 1
        if not ball_inclusion_check(cz):
            violations.append({"check": "diameter", **cz.to_json()})
    n_pairs = n_nonvacuous = 0
    if pairs is None:
        for R1 in traps:
            for R2 in traps:
                n_pairs += 1
                if R1.member_mask(R2.vertices).any() and R1.width >= R2.width:
                    n_nonvacuous += 1
                if not inclusion_lemma_check(R1, R2):
                    violations.append({"check": "inclusion", "R1": R1.to_json(), "R2": R2.to_json()})
    else:
        rng = np.random.default_rng(seed)
        containing = _trapezoids_by_vertex(tree)
        for _ in range(pairs):
            R1 = traps[rng.integers(len(traps))]
            x = int(R1.vertices[rng.integers(len(R1.vertices))])
            R2 = containing[x][rng.integers(len(containing[x]))]
            if R1.width < R2.width:
                R1, R2 = R2, R1
            n_pairs += 1
            n_nonvacuous += 1
            if not inclusion_lemma_check(R1, R2):
                violations.append({"check": "inclusion", "R1": R1.to_json(), "R2": R2.to_json()})
    return {
        "q": tree.q,
        "depth": tree.depth,
        "trapezoids": n_measure,
        "envelopes_checked": n_envelope,
        "cz_sets_checked": n_diam,
        "pairs_checked": n_pairs,
        "pairs_nonvacuous": n_nonvacuous,
        "violations": violations,
    }


def _trapezoids_by_vertex(tree: TreeTruncation) -> list[list[AdmissibleTrapezoid]]:
    table: list[list[AdmissibleTrapezoid]] = [[] for _ in range(tree.n)]
    for R in admissible_trapezoids(tree):
        for v in R.vertices:
            table[int(v)].append(R)
    return table
