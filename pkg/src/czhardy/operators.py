"""The distinguished Laplacian, its spectral calculus, the gradient and Riesz transform,
and kernel diagnostics (Hormander integrals, H^1 -> L^1 ratios)."""

from __future__ import annotations

import math
import os
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable

import numpy as np

from .errors import ContainmentError
from .geometry import CZSet, cz_sets
from .hardy import Atom
from .measure import WeightedMeasure
from .tree import TreeTruncation


def worker_count() -> int:
    """Thread cap for sweeps, from ``CZHARDY_THREADS`` (default 1)."""
    try:
        return max(1, int(os.environ.get("CZHARDY_THREADS", "1")))
    except ValueError:
        return 1


@dataclass
class OperatorMatrix:
    """A linear operator on functions of the truncation.

    ``matrix`` acts on value vectors, ``(Tf)(x) = sum_y matrix[x, y] f(y)``;
    the kernel is ``matrix / mu(y)`` so that ``(Tf)(x) = sum_y K(x,y) f(y) mu(y)``.
    ``symmetric`` optionally holds ``D^(1/2) matrix D^(-1/2)`` with ``D = diag(mu)``.
    """

    m: WeightedMeasure
    matrix: np.ndarray
    name: str = "T"
    symmetric: np.ndarray | None = field(default=None, repr=False)

    @property
    def tree(self) -> TreeTruncation:
        return self.m.tree

    @cached_property
    def kernel(self) -> np.ndarray:
        return self.matrix / self.m.fweights[None, :]

    def apply(self, f) -> np.ndarray:
        return self.matrix @ np.asarray(f, dtype=float)

    __call__ = apply

    @cached_property
    def eigh(self) -> tuple[np.ndarray, np.ndarray]:
        if self.symmetric is None:
            raise ValueError(f"{self.name} carries no symmetrized form")
        return np.linalg.eigh(self.symmetric)


def laplacian(tree: TreeTruncation, m: WeightedMeasure | None = None) -> OperatorMatrix:
    """``Lf(x) = f(x) - (2 sqrt q)^-1 sum_{y~x} q^((l(y)-l(x))/2) f(y)`` with absent neighbours dropped.

    The parent coefficient is ``1/2`` and each child coefficient ``1/(2q)``.
    """
    m = m or WeightedMeasure(tree)
    n, q = tree.n, tree.q
    A = np.eye(n)
    child = np.arange(1, n)
    par = tree.parent[1:]
    A[child, par] = -0.5
    A[par, child] = -0.5 / q
    S = np.eye(n)
    c = 0.5 / math.sqrt(q)
    S[child, par] = -c
    S[par, child] = -c
    return OperatorMatrix(m, A, "laplacian", symmetric=S)


def inner(f, g, m: WeightedMeasure) -> float:
    return float(np.dot(np.asarray(f, float) * m.fweights, np.asarray(g, float)))


def self_adjointness_residual(L: OperatorMatrix, f, g) -> float:
    """``|<Lf, g> - <f, Lg>|`` in ``L^2(mu)``."""
    return abs(inner(L.apply(f), g, L.m) - inner(f, L.apply(g), L.m))


# -- spectral calculus ---------------------------------------------------------------


@dataclass(frozen=True)
class MultiplierSpec:
    """A real function on the spectrum, vectorized over numpy arrays."""

    name: str
    func: Callable[[np.ndarray], np.ndarray] = field(compare=False)
    params: tuple = ()

    def __call__(self, lam):
        return self.func(np.asarray(lam, dtype=float))

    @staticmethod
    def constant(c: float = 1.0) -> "MultiplierSpec":
        return MultiplierSpec("constant", lambda x: np.full_like(x, c), (c,))

    @staticmethod
    def identity() -> "MultiplierSpec":
        return MultiplierSpec("identity", lambda x: x.copy())

    @staticmethod
    def heat(t: float = 1.0) -> "MultiplierSpec":
        return MultiplierSpec("heat", lambda x: np.exp(-t * x), (t,))

    @staticmethod
    def power(k: int) -> "MultiplierSpec":
        """``(1 - lam/2)**k``."""
        return MultiplierSpec("power", lambda x: (1.0 - x / 2.0) ** k, (k,))

    @staticmethod
    def cutoff(a: float, b: float) -> "MultiplierSpec":
        return MultiplierSpec("cutoff", lambda x: ((x >= a) & (x < b)).astype(float), (a, b))

    @staticmethod
    def imaginary_power(s0: float, part: str = "real") -> "MultiplierSpec":
        """Real or imaginary part of ``lam**(i s0)`` (zero at ``lam = 0``)."""
        fn = np.cos if part == "real" else np.sin

        def f(x):
            out = np.zeros_like(x)
            pos = x > 0
            out[pos] = fn(s0 * np.log(x[pos]))
            return out

        return MultiplierSpec(f"imaginary_power_{part}", f, (s0,))

    @staticmethod
    def imaginary_power_parts(s0: float) -> tuple["MultiplierSpec", "MultiplierSpec"]:
        return MultiplierSpec.imaginary_power(s0, "real"), MultiplierSpec.imaginary_power(s0, "imag")

    @staticmethod
    def product(a: "MultiplierSpec", b: "MultiplierSpec") -> "MultiplierSpec":
        return MultiplierSpec(f"{a.name}*{b.name}", lambda x: a(x) * b(x), (a, b))


def named_multiplier(name: str, t: float = 1.0, k: int = 2, s0: float = 1.0) -> MultiplierSpec:
    table = {
        "heat": lambda: MultiplierSpec.heat(t),
        "power": lambda: MultiplierSpec.power(k),
        "identity": MultiplierSpec.identity,
        "imaginary": lambda: MultiplierSpec.imaginary_power(s0),
        "cutoff": lambda: MultiplierSpec.cutoff(0.5, 1.5),
    }
    if name not in table:
        raise ValueError(f"unknown multiplier {name!r}; choose from {sorted(table)}")
    return table[name]()


def spectral_multiplier(L: OperatorMatrix, M: MultiplierSpec) -> OperatorMatrix:
    """``M(L) = D^(-1/2) V M(Lambda) V^T D^(1/2)`` from the symmetrized eigendecomposition."""
    lam, V = L.eigh
    d = np.sqrt(L.m.fweights)
    Ms = (V * M(lam)) @ V.T
    return OperatorMatrix(L.m, Ms * (d[None, :] / d[:, None]), M.name, symmetric=Ms)


def gradient(tree: TreeTruncation, f) -> np.ndarray:
    """``sum over neighbours y in the truncation of |f(y) - f(x)|``."""
    f = np.asarray(f, dtype=float)
    child = np.arange(1, tree.n)
    par = tree.parent[1:]
    jump = np.abs(f[child] - f[par])
    out = np.zeros(tree.n)
    out[child] += jump
    np.add.at(out, par, jump)
    return out


class RieszTransform:
    """``f -> grad(L^(-1/2) f)``; not linear because of the absolute values in ``grad``."""

    name = "riesz"

    def __init__(self, L: OperatorMatrix):
        lam = L.eigh[0]
        if lam.min() <= 0:
            raise ValueError("truncated Laplacian is not positive definite")
        self.L = L
        self.inverse_sqrt = spectral_multiplier(L, MultiplierSpec("inverse_sqrt", lambda x: x ** -0.5))

    @property
    def m(self):
        return self.L.m

    def apply(self, f) -> np.ndarray:
        return gradient(self.L.tree, self.inverse_sqrt.apply(f))

    __call__ = apply


def riesz_transform(L: OperatorMatrix) -> RieszTransform:
    return RieszTransform(L)


# -- Hormander integrals ---------------------------------------------------------------


def _outside_dilate(cz: CZSet) -> np.ndarray:
    out = np.ones(cz.tree.n, dtype=bool)
    out[cz.dilate().vertices] = False
    return out


def hormander_integral(T: OperatorMatrix, cz: CZSet, y, z) -> float:
    """``sum over x outside the dilate of cz of |K(x,y) - K(x,z)| mu(x)``."""
    tree = cz.tree
    y, z = tree.index(y), tree.index(z)
    if not (cz.member_mask([y, z]).all()):
        raise ContainmentError("both points must lie in the CZ set")
    out = _outside_dilate(cz)
    K = T.kernel
    return float(np.dot(np.abs(K[out, y] - K[out, z]), T.m.fweights[out]))


def _hormander_set(K: np.ndarray, w: np.ndarray, cz: CZSet) -> tuple[float, int, int]:
    out = _outside_dilate(cz)
    S = cz.vertices
    if S.size < 2 or not out.any():
        return 0.0, int(S[0]), int(S[0])
    Ko = K[np.ix_(out, S)]
    wo = w[out]
    best, arg = 0.0, (int(S[0]), int(S[0]))
    for j in range(S.size - 1):
        vals = np.abs(Ko[:, j + 1 :] - Ko[:, j : j + 1]).T @ wo
        k = int(np.argmax(vals))
        if vals[k] > best:
            best, arg = float(vals[k]), (int(S[j]), int(S[j + 1 + k]))
    return best, arg[0], arg[1]


@dataclass
class HormanderSweep:
    value: float
    witness: dict
    sets_checked: int
    per_height: dict

    def to_json(self) -> dict:
        return {"sup": self.value, "witness": self.witness, "sets_checked": self.sets_checked,
                "per_height": {str(h): v for h, v in sorted(self.per_height.items())}}


def hormander_sup(T: OperatorMatrix, sets: list[CZSet] | None = None, threads: int | None = None) -> HormanderSweep:
    """Largest Hormander integral over all pairs in every interior non-degenerate CZ set."""
    tree = T.tree
    if sets is None:
        sets = cz_sets(tree, include_degenerate=False, interior=True)
    K, w = T.kernel, T.m.fweights
    with ThreadPoolExecutor(max_workers=threads or worker_count()) as ex:
        results = list(ex.map(lambda cz: _hormander_set(K, w, cz), sets))
    best, witness, per_h = 0.0, {}, {}
    for cz, (v, y, z) in zip(sets, results):
        per_h[cz.h] = max(per_h.get(cz.h, 0.0), v)
        if v > best:
            best = v
            witness = {"set": cz.to_json(), "y": tree.label(y), "z": tree.label(z)}
    return HormanderSweep(best, witness, len(sets), per_h)


# -- H^1 -> L^1 ratios -------------------------------------------------------------------


def l1_norm(f, m: WeightedMeasure) -> float:
    return float(np.dot(np.abs(f), m.fweights))


@dataclass
class RatioReport:
    max_ratio: float
    ratios: list[float]
    local_bound: list[float] | None = None
    tail_bound: list[float] | None = None

    def to_json(self) -> dict:
        d = {"max_ratio": self.max_ratio, "atoms": len(self.ratios)}
        if self.local_bound is not None:
            d["max_local_bound"] = max(self.local_bound, default=0.0)
            d["max_tail_bound"] = max(self.tail_bound, default=0.0)
            d["max_split_bound"] = max((a + b for a, b in zip(self.local_bound, self.tail_bound)), default=0.0)
        return d


def h1_to_l1_ratio(T, atoms: list[Atom], split: bool = True) -> RatioReport:
    """``max ||T a||_1`` over the atoms.

    For a matrix operator the two-piece bound is reported too: on the dilate
    ``||Ta||_2 mu(dilate)^(1/2)``; off it ``||a||_1`` times the largest
    ``int |K(x,y) - K(x,x_R)| dmu(x)`` over ``y`` in the support, ``x_R`` the root.
    """
    m = T.m
    ratios = []
    local, tail = ([], []) if split and isinstance(T, OperatorMatrix) else (None, None)
    for a in atoms:
        vals = np.asarray(a.values, dtype=float)
        Ta = T.apply(vals)
        ratios.append(l1_norm(Ta, m))
        if local is None:
            continue
        cz = a.support
        inside = cz.dilate().vertices
        mu_star = float(m.fweights[inside].sum())
        local.append(math.sqrt(float(np.dot(Ta[inside] ** 2, m.fweights[inside]))) * math.sqrt(mu_star))
        out = _outside_dilate(cz)
        K = T.kernel
        supp = np.nonzero(vals)[0]
        if supp.size == 0:
            tail.append(0.0)
            continue
        diffs = np.abs(K[np.ix_(out, supp)] - K[out, cz.root][:, None]).T @ m.fweights[out]
        tail.append(l1_norm(vals, m) * float(diffs.max()))
    return RatioReport(max(ratios, default=0.0), ratios, local, tail)


# -- Mikhlin-Hormander diagnostic ------------------------------------------------------


def bump(x) -> np.ndarray:
    """Smooth bump supported in ``[1/2, 4]``."""
    x = np.asarray(x, dtype=float)
    out = np.zeros_like(x)
    inside = (x > 0.5) & (x < 4.0)
    u = x[inside]
    out[inside] = np.exp(-1.0 / ((u - 0.5) * (4.0 - u)) + 4.0 / 3.5**2)
    return out


def sobolev_norm(u: np.ndarray, h: float, s: float) -> float:
    """Discrete ``W^s_2`` norm of samples ``u`` on a periodic grid of spacing ``h``."""
    N = u.size
    U = np.fft.fft(u)
    xi = 2 * np.pi * np.fft.fftfreq(N, d=h)
    return float(np.sqrt(h / N * np.sum((1 + xi**2) ** s * np.abs(U) ** 2)))


def mikhlin_hormander_estimate(M, s: float = 2.0, N: int = 4096, refine: int = 0,
                               t_grid=None, phi=bump) -> float:
    """``max over dyadic t of ||M(t .) phi||_{W^s_2}`` sampled on ``[0, 4.5]``.

    ``M`` may be a tuple of real specs (real and imaginary parts of one
    complex multiplier); their norms are combined in quadrature.  A numerical
    estimator only; ``refine`` doubles ``N`` that many times.
    """
    parts = tuple(M) if isinstance(M, (tuple, list)) else (M,)
    if s <= 1.5:
        warnings.warn("s <= 3/2 lies outside the range where the estimate is meaningful", stacklevel=2)
    N = N * 2**refine
    t_grid = 2.0 ** np.arange(-6, 7) if t_grid is None else np.asarray(t_grid, dtype=float)
    h = 4.5 / N
    x = np.arange(N) * h
    ph = phi(x)
    return max(math.hypot(*(sobolev_norm(P(t * x) * ph, h, s) for P in parts)) for t in t_grid)
