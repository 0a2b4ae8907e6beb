"""Atoms, the recursive (1,p) -> (1,inf) atomic decomposition and H^1 upper bounds.

The decomposition runs in exact rational arithmetic when the input values are
``Fraction`` objects and ``p`` is an integer.  Emitted coefficients are the
tightest ones (``sup|g| * mu(support)``), so every emitted atom has sup norm
exactly ``mu(support)**-1``; the stage-wise bounds of the construction are
checked against those coefficients rather than used to define them.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from ._exact import abs_pow, as_exact, is_exact, is_integral, le, le_root, to_str, zeros_like
from .errors import ParameterError
from .geometry import CZSet, smallest_cz_set
from .maximal import cz_covering
from .measure import WeightedMeasure, integrate, lp_norm, lp_norm_pow


@dataclass
class Atom:
    """Candidate ``(1,p)``-atom: ``values`` supported in the CZ set ``support``."""

    support: CZSet
    values: np.ndarray
    p: float = math.inf

    def to_json(self) -> dict:
        tree = self.support.tree
        nz = [int(i) for i in np.nonzero([v != 0 for v in self.values])[0]]
        return {
            "support": self.support.to_json(),
            "p": "inf" if math.isinf(self.p) else to_str(self.p),
            "values": {tree.label(i): to_str(self.values[i]) for i in nz},
        }


def atom_checks(a: Atom, m: WeightedMeasure) -> dict:
    """Evaluate the three atom conditions; exact for rational values with p in {inf} or integer."""
    tree = m.tree
    vals = a.values
    outside = np.ones(tree.n, dtype=bool)
    outside[a.support.vertices_in_tree] = False
    supported = not any(v != 0 for v in vals[outside])
    mu = a.support.measure
    exact = is_exact(vals)
    if math.isinf(a.p):
        sup = lp_norm(vals, m, math.inf)
        size = le(sup * mu, 1) if exact else le(float(sup) * float(mu), 1.0)
    elif exact and is_integral(a.p):
        p = int(a.p)
        size = lp_norm_pow(vals, m, p) * Fraction(mu) ** (p - 1) <= 1
    else:
        size = le(lp_norm(vals, m, a.p), float(mu) ** (1.0 / a.p - 1.0))
    total = integrate(vals, m)
    if exact:
        mean_zero = total == 0
    else:
        mean_zero = abs(total) <= 1e-12 * max(float(lp_norm(vals, m, 1)), 1.0)
    return {"supported": supported, "size": bool(size), "mean_zero": bool(mean_zero)}


def validate_atom(a: Atom, m: WeightedMeasure | None = None) -> bool:
    m = m or WeightedMeasure(a.support.tree)
    return all(atom_checks(a, m).values())


def random_atom(m: WeightedMeasure, rng, support: CZSet | None = None, p=math.inf,
                exact: bool = False, interior: bool = False) -> Atom:
    """Random mean-zero function on a CZ set, scaled to saturate the size condition.

    For ``p = inf`` the sup norm equals ``mu(support)**-1`` exactly.  For finite
    ``p`` the ``L^p`` norm equals (exact mode: does not exceed) ``mu**(1/p-1)``.
    """
    from .geometry import cz_sets

    tree = m.tree
    if support is None:
        choices = cz_sets(tree, include_degenerate=False, interior=interior)
        support = choices[int(rng.integers(len(choices)))]
    idx = support.vertices_in_tree
    vals = zeros_like(as_exact(np.zeros(tree.n)) if exact else np.zeros(tree.n))
    raw = rng.integers(-50, 51, size=len(idx))
    if exact:
        raw_f = [Fraction(int(x)) for x in raw]
        w = [m.weights[i] for i in idx]
        mean = sum((x * wi for x, wi in zip(raw_f, w)), Fraction(0)) / sum(w, 0)
        centred = [x - mean for x in raw_f]
    else:
        w = m.fweights[idx]
        raw_f = raw.astype(float)
        centred = raw_f - np.dot(raw_f, w) / w.sum()
    vals[idx] = centred
    mu = support.measure
    if math.isinf(p):
        sup = max(abs(v) for v in vals) if exact else float(np.max(np.abs(vals)))
        if sup == 0:
            return Atom(support, vals, p)
        scale = (Fraction(1) / (sup * mu)) if exact else 1.0 / (sup * float(mu))
    elif exact and is_integral(p):
        target = Fraction(1) / Fraction(mu) ** (int(p) - 1)
        scale = _rational_root_below(target / lp_norm_pow(vals, m, int(p)), int(p))
    else:
        scale = float(mu) ** (1.0 / p - 1.0) / lp_norm(vals, m, p)
    vals = vals * scale
    return Atom(support, vals, p)


def _rational_root_below(x: Fraction, p: int) -> Fraction:
    """A rational ``r <= x**(1/p)`` within about 1e-12 relative."""
    r = Fraction(float(x) ** (1.0 / p)).limit_denominator(10**15)
    while r**p > x:
        r *= Fraction(10**12 - 1, 10**12)
    return r


def _rational_root_above(x: Fraction, p: int) -> Fraction:
    r = Fraction(float(x) ** (1.0 / p)).limit_denominator(10**15)
    while r**p < x:
        r *= Fraction(10**12 + 1, 10**12)
    return r


# -- the recursive construction -------------------------------------------------


def alpha_threshold(q: int, p) -> float:
    """``2 * (24 q (1 + 4**p))**(1/(p-1))``: the construction needs ``alpha`` above it."""
    return 2.0 * (24 * q * (1 + 4.0**p)) ** (1.0 / (p - 1))


def alpha_admissible(alpha, q: int, p) -> bool:
    if is_integral(p) and not isinstance(alpha, float):
        p = int(p)
        return (Fraction(alpha) / 2) ** (p - 1) > 24 * q * (1 + 4**p)
    return float(alpha) > alpha_threshold(q, p)


def default_alpha(q: int, p):
    """Twice the threshold; the smallest integer at or above it when ``p`` is an integer."""
    if is_integral(p):
        p = int(p)
        X = 4 ** (p - 1) * 24 * q * (1 + 4**p)
        a = max(1, int(round(X ** (1.0 / (p - 1)))) - 2)
        while a ** (p - 1) < X:
            a += 1
        return a
    return 2.0 * alpha_threshold(q, p)


def proof_constant(q: int, p, alpha) -> float:
    """Sum over stages of the coefficient bound: ``16 (6q)^(1/p) alpha / (1 - r)``.

    ``r = 4 * 2^(p-1) * 6q * (1+4^p) * alpha^(1-p)`` is the per-stage ratio; it
    is below 1 exactly when ``alpha`` clears the threshold.
    """
    p, alpha = float(p), float(alpha)
    r = 4 * 2 ** (p - 1) * 6 * q * (1 + 4**p) * alpha ** (1 - p)
    if r >= 1:
        return math.inf
    return 16 * (6 * q) ** (1 / p) * alpha / (1 - r)


@dataclass
class StageCertificate:
    stage: int
    threshold: object
    pieces_in: int
    atoms_emitted: int
    coverings_used: int
    pieces_out: int
    sum_mu_envelopes: object
    sum_mu_bound: object
    residual_l1: object
    residual_bound: float
    atom_sup_ok: bool
    support_and_mean_ok: bool
    local_lp_ok: bool
    pointwise_ok: bool
    envelope_sum_ok: bool
    residual_ok: bool

    @property
    def ok(self) -> bool:
        return (self.atom_sup_ok and self.support_and_mean_ok and self.local_lp_ok
                and self.pointwise_ok and self.envelope_sum_ok and self.residual_ok)

    def to_json(self) -> dict:
        return {k: (v if isinstance(v, (bool, int)) else to_str(v)) for k, v in self.__dict__.items()}


@dataclass
class AtomicDecomposition:
    """``input = sum(coef * atom) + residual``; pending pieces make up the residual."""

    terms: list[tuple[object, Atom]]
    residual: np.ndarray
    pending: list[tuple[np.ndarray, CZSet]]
    depth: int
    alpha: object
    p: object
    stages: list[StageCertificate] = field(default_factory=list)

    def reconstruct(self) -> np.ndarray:
        out = self.residual.copy()
        for c, a in self.terms:
            out = out + c * a.values
        return out

    @property
    def coefficient_sum(self):
        return sum((abs(c) for c, _ in self.terms), Fraction(0) if is_exact(self.residual) else 0.0)

    @property
    def certified(self) -> bool:
        return all(s.ok for s in self.stages)

    def to_json(self) -> dict:
        return {
            "alpha": to_str(self.alpha),
            "p": to_str(self.p),
            "depth": self.depth,
            "coefficient_sum": to_str(self.coefficient_sum),
            "terms": [{"coefficient": to_str(c), **a.to_json()} for c, a in self.terms],
            "residual_pieces": len(self.pending),
            "stages": [s.to_json() for s in self.stages],
        }


def _split_piece(fv, S: CZSet, cov, m: WeightedMeasure, exact: bool):
    """Pieces ``f_i = f 1_{U_i} - (mean over R_i) 1_{R_i}`` and ``g = f - sum f_i``."""
    tree = m.tree
    taken = np.zeros(tree.n, dtype=bool)
    pieces = []
    g = fv.copy()
    for R, env in zip(cov.selected, cov.envelopes):
        U = env.vertices_in_tree[~taken[env.vertices_in_tree]]
        taken[U] = True
        h = zeros_like(fv)
        h[U] = fv[U]
        c = integrate(h, m, U)
        c = Fraction(c) / R.measure if exact else c / float(R.measure)
        fi = h
        fi[R.vertices] = fi[R.vertices] - c
        g = g - fi
        pieces.append((fi, env))
    return g, pieces


def atomic_decompose(a: Atom, m: WeightedMeasure | None = None, alpha=None, max_depth: int = 4,
                     tol=None, enforce_threshold: bool = True) -> AtomicDecomposition:
    """Rewrite a ``(1,p)``-atom as ``(1,inf)``-atoms plus a residual after ``max_depth`` stages.

    Starting from ``b = mu(Q) a``, each stage ``n`` takes every pending piece
    (supported in a CZ set ``S``) and covers ``{M_S(|f|^p) > alpha^(n p)}``.
    Uncovered pieces become one atom; otherwise the envelope pieces ``f_i`` are
    split off, ``g = f - sum f_i`` becomes one atom and the ``f_i`` are pending
    for stage ``n+1``.  Every stage is certified against the explicit
    constants (``6q``, ``4``, ``2^(p-1)(1+4^p)`` and powers of ``alpha``).
    Stops early when nothing is pending or the residual ``L^1`` norm is below ``tol``.
    """
    Q = a.support
    m = m or WeightedMeasure(Q.tree)
    p = a.p
    if not (1 < p < math.inf):
        raise ParameterError(f"exponent must lie in (1, inf), got {p}")
    q = m.tree.q
    exact = is_exact(a.values) and is_integral(p)
    if exact:
        p = int(p)
    if alpha is None:
        alpha = default_alpha(q, p)
    if enforce_threshold and not alpha_admissible(alpha, q, p):
        raise ParameterError(
            f"alpha={alpha} does not exceed 2*(24q(1+4^p))^(1/(p-1)) = {alpha_threshold(q, p):.6g}"
        )
    if exact:
        alpha = Fraction(alpha)
        vals = a.values
    else:
        alpha = float(alpha)
        vals = np.asarray(a.values, dtype=float)
    muQ = Fraction(Q.measure) if exact else float(Q.measure)
    b = vals * muQ
    abs_b = abs_pow(b, 1)
    norm_b = lp_norm_pow(b, m, p)
    six_q = 6 * q
    K = 2 ** (p - 1) * six_q * (1 + 4**p)
    c_res = 3 * q * (1 + 4**p)
    zero = Fraction(0) if exact else 0.0

    terms: list[tuple[object, Atom]] = []
    pending = [(b, Q)]
    stages: list[StageCertificate] = []
    depth = 0
    for n in range(1, max_depth + 1):
        if not pending:
            break
        depth = n
        thr = alpha**n
        n_in = len(pending)
        new_pending = []
        atom_sup_ok = supp_ok = lp_ok = pw_ok = True
        coverings = emitted = 0
        sum_env = zero
        for fv, S in pending:
            sup = max(abs(v) for v in fv)
            pieces = []
            g = fv
            if sup > thr:
                cov = cz_covering(fv, m, p, thr, Q=S)
                if len(cov.level_set):
                    coverings += 1
                    g, pieces = _split_piece(fv, S, cov, m, exact)
            gsup = max(abs(v) for v in g)
            if gsup != 0:
                coef = gsup * (Fraction(S.measure) if exact else float(S.measure))
                terms.append((coef, Atom(S, g / coef, math.inf)))
                emitted += 1
                atom_sup_ok &= le_root(gsup, 4 * thr, six_q, p)
            for fi, env in pieces:
                outside = np.ones(m.tree.n, dtype=bool)
                outside[env.vertices_in_tree] = False
                mean = integrate(fi, m)
                supp_ok &= not any(v != 0 for v in fi[outside])
                supp_ok &= (mean == 0) if exact else abs(mean) <= 1e-9 * max(float(sup), 1.0)
                mu_env = Fraction(env.measure) if exact else float(env.measure)
                lp_ok &= le(lp_norm_pow(fi, m, p), K * thr**p * mu_env)
                excess = max(max(abs(x) - y for x, y in zip(fi, abs_b)), zero)
                pw_ok &= le_root(excess, 4 * n * thr, six_q, p)
                sum_env += mu_env
                if any(v != 0 for v in fi):
                    new_pending.append((fi, env))
        pending = new_pending
        bound_v = 4 ** (n + 1) * Fraction(K) ** n / alpha ** (n * p) * norm_b if exact else \
            4 ** (n + 1) * K**n * alpha ** (-n * p) * norm_b
        resid_l1 = sum((lp_norm(fi, m, 1) for fi, _ in pending), zero)
        resid_coef = 2 * bound_v * thr
        resid_ok = le_root(resid_l1, resid_coef, c_res, p)
        stages.append(StageCertificate(
            stage=n, threshold=thr, pieces_in=n_in, atoms_emitted=emitted,
            coverings_used=coverings, pieces_out=len(pending), sum_mu_envelopes=sum_env,
            sum_mu_bound=bound_v, residual_l1=resid_l1,
            residual_bound=float(resid_coef) * float(c_res) ** (1.0 / p),
            atom_sup_ok=bool(atom_sup_ok), support_and_mean_ok=bool(supp_ok), local_lp_ok=bool(lp_ok),
            pointwise_ok=bool(pw_ok), envelope_sum_ok=bool(le(sum_env, bound_v)), residual_ok=bool(resid_ok),
        ))
        if tol is not None and float(resid_l1) <= float(tol) * float(muQ):
            break
    residual = zeros_like(b)
    for fi, _ in pending:
        residual = residual + fi
    return AtomicDecomposition(
        terms=[(c / muQ, at) for c, at in terms],
        residual=residual / muQ,
        pending=[(fi / muQ, S) for fi, S in pending],
        depth=depth,
        alpha=alpha,
        p=p,
        stages=stages,
    )


# -- H^1 upper bounds -----------------------------------------------------------


@dataclass
class H1Bound:
    """Upper bound for ``||f||_{H^1}`` built from explicit atomic decompositions."""

    value: float
    coefficient_sum: float
    residual_term: float
    proof_constant: float
    pieces: list[tuple[CZSet, np.ndarray, AtomicDecomposition, object]]


def split_mean_zero(f, m: WeightedMeasure) -> list[tuple[np.ndarray, CZSet]]:
    """Write a mean-zero function as a sum of mean-zero pieces, each inside one CZ set.

    A support that already fits in a CZ set is returned as is.  Otherwise the
    function is split along the subtrees of the children of the current root:
    each child subtree keeps its own values minus its mass moved onto the child,
    and the moved masses plus the root value form one more piece living on the
    root and its children.  Subtrees of height at most 6 always fit in a CZ set,
    so the recursion ends.  The apex lies in no non-degenerate CZ set of the
    cone, so a nonzero value there cannot be split.
    """
    tree = m.tree
    exact = is_exact(f)
    f = f if exact else np.asarray(f, dtype=float)
    out = []

    def rec(F, v):
        supp = np.nonzero([x != 0 for x in F])[0]
        if supp.size == 0:
            return
        cz = smallest_cz_set(tree, supp)
        if cz is not None and not (cz.degenerate and F[supp[0]] != 0):
            out.append((F, cz))
            return
        if v == 0 and F[0] != 0:
            raise ValueError("mean-zero function with nonzero apex value has no CZ-supported splitting")
        hub = zeros_like(F)
        hub[v] = F[v]
        for c in tree.children(v):
            Fc = zeros_like(F)
            for k in range(0, tree.depth - int(tree.depths[c]) + 1):
                s, e = tree.descendant_block(c, k)
                Fc[s:e] = F[s:e]
            mass = integrate(Fc, m)
            wc = m.weights[c] if exact else m.fweights[c]
            shift = Fraction(mass) / wc if exact else mass / wc
            Fc[c] = Fc[c] - shift
            hub[c] = hub[c] + shift
            rec(Fc, c)
        if any(x != 0 for x in hub):
            cz = smallest_cz_set(tree, np.nonzero([x != 0 for x in hub])[0])
            out.append((hub, cz))

    rec(f, 0)
    return out


def h1_norm_upper_bound(f, m: WeightedMeasure, p=2, support: CZSet | None = None, alpha=None,
                        max_depth: int = 4, enforce_threshold: bool = True) -> H1Bound:
    """Upper bound for the ``H^1`` norm of a mean-zero function.

    Each CZ-supported piece is rescaled to a ``(1,p)``-atom and decomposed;
    the bound is the rescaled coefficient sum plus, for whatever is still
    pending after ``max_depth`` stages, the smaller of its one-atom cost and
    ``C_p`` times its ``(1,p)`` size.
    """
    exact = is_exact(f)
    total = integrate(f, m)
    if exact and total != 0 or not exact and abs(total) > 1e-10 * max(float(lp_norm(f, m, 1)), 1.0):
        raise ValueError("H^1 bound requires a function with vanishing integral")
    q = m.tree.q
    if exact and is_integral(p):
        p = int(p)
    a_used = alpha if alpha is not None else default_alpha(q, p)
    Cp = proof_constant(q, p, a_used)
    pieces = [(f, support)] if support is not None else split_mean_zero(f, m)
    coef_sum = resid = 0.0
    report = []
    for F, S in pieces:
        if not any(v != 0 for v in F):
            continue
        mu = S.measure
        if exact and is_integral(p):
            s = _rational_root_above(lp_norm_pow(F, m, p) * Fraction(mu) ** (p - 1), p)
        else:
            F = np.asarray(F, dtype=float)
            s = lp_norm(F, m, p) * float(mu) ** (1 - 1 / p)
        dec = atomic_decompose(Atom(S, F / s, p), m, alpha=a_used, max_depth=max_depth,
                               enforce_threshold=enforce_threshold)
        coef_sum += float(s) * float(dec.coefficient_sum)
        for r, T in dec.pending:
            # a pending piece is mean-zero in T: it is sup|r| mu(T) times a (1,inf)-atom,
            # and C_p times its (1,p) size when alpha clears the threshold
            one_shot = float(lp_norm(r, m, math.inf)) * float(T.measure)
            resid += float(s) * min(one_shot, Cp * lp_norm(r, m, p) * float(T.measure) ** (1 - 1 / p))
        report.append((S, F, dec, s))
    return H1Bound(value=coef_sum + resid, coefficient_sum=coef_sum, residual_term=resid,
                   proof_constant=Cp, pieces=report)
