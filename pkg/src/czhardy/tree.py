"""Finite cone of a homogeneous tree of order q+1 below a fixed apex.

Vertices are addressed by words over the digits ``0..q-1`` (the empty word is
the apex) and stored densely in breadth-first order.  In that order the
children of vertex ``i`` are ``q*i+1 .. q*i+q`` and, more generally, the
descendants of ``i`` at relative depth ``k`` form the contiguous block::

    [q**k * i + (q**k - 1) // (q - 1),  ... + q**k)

which is what makes level-wise integrals over trapezoids cheap.
"""

from __future__ import annotations

from collections.abc import Iterable, Sequence
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .errors import ContainmentError


@dataclass(frozen=True)
class TreeConfig:
    q: int
    depth: int
    apex_level: int | None = field(default=None)

    def __post_init__(self):
        if int(self.q) != self.q or self.q < 2:
            raise ValueError(f"q must be an integer >= 2, got {self.q!r}")
        if int(self.depth) != self.depth or self.depth < 1:
            raise ValueError(f"depth must be an integer >= 1, got {self.depth!r}")
        if self.apex_level is None:
            object.__setattr__(self, "apex_level", int(self.depth))

    @property
    def vertex_count(self) -> int:
        return (self.q ** (self.depth + 1) - 1) // (self.q - 1)


Vertex = int | str | Sequence[int]


class TreeTruncation:
    """Immutable cone of depth ``D`` below the apex, levels ``apex_level - depth``.

    Methods taking a vertex accept a dense index (``int``), a word string
    (``"01"``; dot-separated digits when ``q > 10``) or a tuple of digits.
    """

    def __init__(self, q: int, depth: int, apex_level: int | None = None):
        self.config = TreeConfig(q, depth, apex_level)
        self.q = self.config.q
        self.depth = self.config.depth
        self.apex_level = self.config.apex_level
        q, D = self.q, self.depth
        # level_start[k] = index of the first vertex at depth k
        self.level_start = np.array([(q**k - 1) // (q - 1) for k in range(D + 2)], dtype=np.int64)
        self.n = int(self.level_start[-1])
        self.depths = np.repeat(np.arange(D + 1), [q**k for k in range(D + 1)]).astype(np.int64)
        self.depths.flags.writeable = False
        self.levels = self.apex_level - self.depths
        self.levels.flags.writeable = False
        parent = (np.arange(self.n, dtype=np.int64) - 1) // q
        parent[0] = -1
        self.parent = parent
        self.parent.flags.writeable = False

    @classmethod
    def from_config(cls, config: TreeConfig) -> "TreeTruncation":
        return cls(config.q, config.depth, config.apex_level)

    def __repr__(self):
        return f"TreeTruncation(q={self.q}, depth={self.depth}, apex_level={self.apex_level})"

    def __len__(self):
        return self.n

    # -- addressing ---------------------------------------------------------

    def index(self, v: Vertex) -> int:
        if isinstance(v, (int, np.integer)):
            i = int(v)
            if not 0 <= i < self.n:
                raise ContainmentError(f"vertex index {i} outside truncation of size {self.n}")
            return i
        digits = self._parse_word(v)
        if len(digits) > self.depth:
            raise ContainmentError(f"word {v!r} is deeper than depth {self.depth}")
        q = self.q
        offset = 0
        for d in digits:
            if not 0 <= d < q:
                raise ContainmentError(f"digit {d} not in 0..{q - 1}")
            offset = offset * q + d
        return int(self.level_start[len(digits)]) + offset

    def _parse_word(self, v) -> tuple[int, ...]:
        if isinstance(v, str):
            if self.q > 10:
                return tuple(int(s) for s in v.split(".")) if v else ()
            return tuple(int(c) for c in v)
        return tuple(int(d) for d in v)

    def word(self, i: int) -> tuple[int, ...]:
        i = self.index(i)
        k = int(self.depths[i])
        offset = i - int(self.level_start[k])
        digits = []
        for _ in range(k):
            offset, d = divmod(offset, self.q)
            digits.append(d)
        return tuple(reversed(digits))

    def label(self, i: int) -> str:
        sep = "." if self.q > 10 else ""
        return sep.join(str(d) for d in self.word(i))

    def level(self, v: Vertex) -> int:
        return int(self.levels[self.index(v)])

    # -- local structure ----------------------------------------------------

    def children(self, v: Vertex) -> range:
        i = self.index(v)
        if self.depths[i] == self.depth:
            return range(0)
        return range(self.q * i + 1, self.q * i + self.q + 1)

    def neighbors(self, v: Vertex) -> list[int]:
        """Parent (unless apex) followed by children (unless bottom level)."""
        i = self.index(v)
        out = [] if i == 0 else [int(self.parent[i])]
        out.extend(self.children(i))
        return out

    def ancestor(self, v: Vertex, k: int) -> int:
        """Ancestor ``k`` levels above ``v``."""
        i = self.index(v)
        if k > self.depths[i]:
            raise ContainmentError(f"vertex {self.label(i)!r} has no ancestor {k} levels up")
        for _ in range(k):
            i = (i - 1) // self.q
        return i

    def descendant_block(self, v: Vertex, k: int) -> tuple[int, int]:
        """Half-open index range of the descendants of ``v`` exactly ``k`` levels below."""
        i = self.index(v)
        if self.depths[i] + k > self.depth:
            raise ContainmentError(
                f"descendants of {self.label(i)!r} at relative depth {k} exceed depth {self.depth}"
            )
        qk = self.q**k
        start = qk * i + (qk - 1) // (self.q - 1)
        return start, start + qk

    @cached_property
    def ancestors(self) -> np.ndarray:
        """``ancestors[v, k]`` is the ancestor of ``v`` at depth ``k`` (``-1`` if ``k > depth(v)``)."""
        A = np.full((self.n, self.depth + 1), -1, dtype=np.int64)
        cur = np.arange(self.n, dtype=np.int64)
        for up in range(self.depth + 1):
            k = self.depths - up
            ok = k >= 0
            A[np.nonzero(ok)[0], k[ok]] = cur[ok]
            cur = np.where(cur > 0, (cur - 1) // self.q, 0)
        A.flags.writeable = False
        return A

    # -- metric -------------------------------------------------------------

    def distance(self, x: Vertex, y: Vertex) -> int:
        i, j = self.index(x), self.index(y)
        d = 0
        while self.depths[i] > self.depths[j]:
            i = (i - 1) // self.q
            d += 1
        while self.depths[j] > self.depths[i]:
            j = (j - 1) // self.q
            d += 1
        while i != j:
            i = (i - 1) // self.q
            j = (j - 1) // self.q
            d += 2
        return d

    def distances_from(self, x: Vertex, targets: Iterable[int] | None = None) -> np.ndarray:
        """Graph distances from ``x`` to ``targets`` (all vertices by default)."""
        i = self.index(x)
        dx = int(self.depths[i])
        tgt = np.arange(self.n) if targets is None else np.asarray(targets, dtype=np.int64)
        A = self.ancestors
        common = (A[tgt, : dx + 1] == A[i, : dx + 1]).sum(axis=1) - 1
        return self.depths[tgt] + dx - 2 * common

    def lies_below(self, x: Vertex, y: Vertex) -> bool:
        """True iff ``y``'s word is a prefix of ``x``'s word."""
        i, j = self.index(x), self.index(y)
        k = int(self.depths[i]) - int(self.depths[j])
        return k >= 0 and self.ancestor(i, k) == j

    def neighborhood(self, vertices: Iterable[int], radius: int) -> np.ndarray:
        """Sorted indices within graph distance ``radius`` of a vertex set."""
        seen = np.zeros(self.n, dtype=bool)
        frontier = np.unique(np.asarray(list(vertices), dtype=np.int64))
        seen[frontier] = True
        q = self.q
        for _ in range(radius):
            if frontier.size == 0:
                break
            up = self.parent[frontier]
            up = up[up >= 0]
            inner = frontier[self.depths[frontier] < self.depth]
            down = (q * inner[:, None] + np.arange(1, q + 1)).ravel()
            nxt = np.concatenate([up, down])
            nxt = np.unique(nxt[~seen[nxt]])
            seen[nxt] = True
            frontier = nxt
        return np.nonzero(seen)[0]
