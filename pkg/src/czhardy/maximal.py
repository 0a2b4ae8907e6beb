"""Trapezoid maximal functions and the greedy Calderon-Zygmund covering."""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

from ._exact import abs_pow, is_exact, is_integral, power, to_str, zeros_like
from .errors import InvariantViolation
from .geometry import AdmissibleTrapezoid, CZSet, admissible_trapezoids, trapezoids_within
from .measure import WeightedMeasure, lp_norm_pow, mu_set


class LevelIntegrator:
    """Integrals of a fixed function over block-structured vertex sets.

    Uses prefix sums in breadth-first order: every block lies on one level,
    where the weight is constant.
    """

    def __init__(self, values, m: WeightedMeasure):
        self.exact = is_exact(values)
        if self.exact:
            P = np.empty(len(values) + 1, dtype=object)
            P[0] = Fraction(0)
            P[1:] = np.cumsum(values)
            self.depth_weights = m.depth_weights
        else:
            P = np.concatenate([[0.0], np.cumsum(np.asarray(values, dtype=float))])
            self.depth_weights = [float(w) for w in m.depth_weights]
        self.prefix = P

    def integral(self, S, clip: bool = False):
        P, w = self.prefix, self.depth_weights
        total = Fraction(0) if self.exact else 0.0
        for a, b, k in S.blocks(clip=clip):
            total += (P[b] - P[a]) * w[k]
        return total

    def average(self, R):
        s = self.integral(R)
        return Fraction(s) / R.measure if self.exact else s / float(R.measure)


def _family(m: WeightedMeasure, Q: CZSet | None) -> Sequence[AdmissibleTrapezoid]:
    return admissible_trapezoids(m.tree) if Q is None else trapezoids_within(Q)


def _sup_over(values, m: WeightedMeasure, family) -> np.ndarray:
    I = LevelIntegrator(values, m)
    out = zeros_like(values)
    for R in family:
        avg = I.average(R)
        for a, b, _ in R.blocks():
            np.maximum(out[a:b], avg, out=out[a:b])
    return out


def maximal_function(f, m: WeightedMeasure) -> np.ndarray:
    """``Mf(x)``: largest average of ``|f|`` over admissible trapezoids containing ``x``.

    Only trapezoids that fit in the truncation take part.  Exact for object arrays.
    """
    return _sup_over(abs_pow(f, 1), m, admissible_trapezoids(m.tree))


def restricted_maximal_function(f, m: WeightedMeasure, Q: CZSet) -> np.ndarray:
    """As ``maximal_function`` but over trapezoids inside ``Q``; zero off ``Q``."""
    return _sup_over(abs_pow(f, 1), m, trapezoids_within(Q))


@dataclass
class CoveringResult:
    selected: list[AdmissibleTrapezoid]
    envelopes: list[CZSet]
    level_set: np.ndarray
    lambda_p: object
    p: object
    norm_p_pow: object
    s0: list[AdmissibleTrapezoid] = field(repr=False)
    restricted_to: CZSet | None = None

    def envelope_union(self) -> np.ndarray:
        if not self.envelopes:
            return np.zeros(0, dtype=np.int64)
        return np.unique(np.concatenate([cz.vertices_in_tree for cz in self.envelopes]))

    def certify(self, m: WeightedMeasure) -> dict:
        """Check every covering property exactly; raise ``InvariantViolation`` on failure.

        Envelopes that stick out of the truncation contribute their in-tree
        part to ``E`` and their full analytic measure to ``sum mu(R~_i)``.
        """
        tree = m.tree
        exact = isinstance(self.lambda_p, Fraction) or isinstance(self.lambda_p, int)
        owner = np.full(tree.n, -1, dtype=np.int64)
        for i, R in enumerate(self.selected):
            v = R.vertices
            if (owner[v] >= 0).any():
                raise InvariantViolation("selected trapezoids overlap", R.to_json())
            owner[v] = i
        E = self.envelope_union()
        in_E = np.zeros(tree.n, dtype=bool)
        in_E[E] = True
        if not in_E[self.level_set].all():
            bad = int(self.level_set[~in_E[self.level_set]][0])
            raise InvariantViolation("level set not covered by envelopes", {"vertex": tree.label(bad)})
        sum_R = sum((R.measure for R in self.selected), 0)
        sum_env = sum((cz.measure for cz in self.envelopes), 0)
        mu_E = mu_set(m, E)
        lp, norm = self.lambda_p, self.norm_p_pow
        if not exact:
            sum_R, sum_env, mu_E = float(sum_R), float(sum_env), float(mu_E)
        tol = 0 if exact else 1e-9 * max(float(norm), 1.0)
        checks = {
            "sum_mu_R_le_norm_over_lambda_p": sum_R * lp <= norm + tol,
            "sum_mu_env_le_4_sum_mu_R": sum_env <= 4 * sum_R,
            "mu_E_le_4_norm_over_lambda_p": mu_E * lp <= 4 * norm + tol,
        }
        for name, ok in checks.items():
            if not ok:
                raise InvariantViolation(f"covering bound failed: {name}", self.to_json())
        for R in self.s0:
            hits = np.unique(owner[R.vertices])
            hits = hits[hits >= 0]
            good = [
                i for i in hits
                if self.selected[i].width >= R.width and self.envelopes[i].member_mask(R.vertices).all()
            ]
            if not good:
                raise InvariantViolation("trapezoid of S0 not absorbed by a selected envelope", R.to_json())
        if self.restricted_to is not None:
            for R in self.selected:
                if not self.restricted_to.member_mask(R.vertices).all():
                    raise InvariantViolation("selected trapezoid leaves the restricting set", R.to_json())
        return {
            "selected": len(self.selected),
            "s0": len(self.s0),
            "level_set_size": int(len(self.level_set)),
            "sum_mu_R": sum_R,
            "sum_mu_envelopes": sum_env,
            "mu_E": mu_E,
            "norm_p_pow": norm,
            "lambda_p": lp,
            **checks,
        }

    def to_json(self) -> dict:
        tree = self.selected[0].tree if self.selected else None
        return {
            "p": to_str(self.p),
            "lambda_p": to_str(self.lambda_p),
            "norm_p_pow": to_str(self.norm_p_pow),
            "selected": [R.to_json() for R in self.selected],
            "envelopes": [cz.to_json() for cz in self.envelopes],
            "level_set": [] if tree is None else [tree.label(int(v)) for v in self.level_set],
            "restricted_to": None if self.restricted_to is None else self.restricted_to.to_json(),
        }


def cz_covering(f, m: WeightedMeasure, p, lam, Q: CZSet | None = None) -> CoveringResult:
    """Greedy largest-width covering of ``{M(|f|^p) > lam^p}``.

    ``S0`` holds the trapezoids (inside ``Q`` when given) with
    ``int_R |f|^p >= lam^p mu(R)``; they are scanned by decreasing width, ties
    broken by canonical order, and each one disjoint from all earlier picks is
    selected.  This is the same sequence as re-choosing the widest, earliest
    member of the shrinking family at every step.  On a finite truncation
    ``S0`` is finite, so the scan terminates.
    """
    if lam <= 0:
        raise ValueError("threshold must be positive")
    exact = is_exact(f) and is_integral(p) and not isinstance(lam, float)
    if exact:
        p = int(p)
        lam = Fraction(lam)
    else:
        f = np.asarray(f, dtype=float)
        p, lam = float(p), float(lam)
    tree = m.tree
    if Q is not None:
        outside = np.ones(tree.n, dtype=bool)
        outside[Q.vertices_in_tree] = False
        if any(v != 0 for v in f[outside]):
            raise ValueError("function is not supported in the restricting CZ set")
    g = abs_pow(f, p)
    lam_p = power(lam, p)
    family = _family(m, Q)
    I = LevelIntegrator(g, m)
    s0 = []
    M = zeros_like(g)
    for R in family:
        s = I.integral(R)
        avg = s / R.measure if exact else s / float(R.measure)
        for a, b, _ in R.blocks():
            np.maximum(M[a:b], avg, out=M[a:b])
        if s >= lam_p * (R.measure if exact else float(R.measure)):
            s0.append(R)
    level_set = np.nonzero(np.array([v > lam_p for v in M], dtype=bool))[0]
    covered = np.zeros(tree.n, dtype=bool)
    selected = []
    for R in sorted(s0, key=lambda R: (-R.width, R.key)):
        v = R.vertices
        if not covered[v].any():
            covered[v] = True
            selected.append(R)
    envelopes = [CZSet(tree, R.root, R.h, R.degenerate) for R in selected]
    return CoveringResult(
        selected=selected,
        envelopes=envelopes,
        level_set=level_set,
        lambda_p=lam_p,
        p=p,
        norm_p_pow=lp_norm_pow(f, m, p),
        s0=s0,
        restricted_to=Q,
    )
