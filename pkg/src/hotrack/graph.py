"""Communication topology of a leader-follower network.

Followers are numbered 1..N, the leader is node 0. Follower-follower links
are undirected and weighted; leader links are one-way weights b_i. The
matrices used by the certificates are the Laplacian L of the follower graph,
B = diag(b) and H = L + B.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .errors import DuplicateEdge, IndexOutOfRange, NonPositiveWeight, SelfLoop

#: λ_min(H) must exceed this for H to count as positive definite.
PD_TOL = 1e-9


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class Topology:
    """Validated follower graph plus leader links.

    Attributes:
        n_followers: number of followers N.
        edges: mapping (i, j) -> weight with i < j, 1-based follower ids.
        leader_links: mapping i -> b_i for followers the leader talks to.
    """

    n_followers: int
    edges: dict[tuple[int, int], float]
    leader_links: dict[int, float]
    adjacency: np.ndarray = field(init=False, repr=False, compare=False)
    leader_weights: np.ndarray = field(init=False, repr=False, compare=False)
    laplacian: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        n = self.n_followers
        a = np.zeros((n, n))
        for (i, j), w in self.edges.items():
            a[i - 1, j - 1] = a[j - 1, i - 1] = w
        b = np.zeros(n)
        for i, w in self.leader_links.items():
            b[i - 1] = w
        object.__setattr__(self, "adjacency", _frozen(a))
        object.__setattr__(self, "leader_weights", _frozen(b))
        object.__setattr__(self, "laplacian", _frozen(np.diag(a.sum(axis=1)) - a))

    def neighbors(self, i: int) -> list[int]:
        """1-based neighbour ids of follower ``i`` (leader excluded)."""
        return [j + 1 for j in np.flatnonzero(self.adjacency[i - 1])]

    @property
    def informed(self) -> list[int]:
        return sorted(i for i, w in self.leader_links.items() if w > 0)


def build_topology(
    n: int,
    edges: Iterable[Sequence[float]] = (),
    leader_links: Iterable[Sequence[float]] = (),
) -> Topology:
    """Validate raw edge lists and build a :class:`Topology`.

    ``edges`` holds ``(i, j)`` or ``(i, j, weight)`` items and ``leader_links``
    holds ``(i,)`` or ``(i, weight)``; omitted weights default to 1.
    """
    if int(n) != n or n < 1:
        raise IndexOutOfRange(f"number of followers must be a positive integer, got {n!r}")
    n = int(n)

    def _node(v: float) -> int:
        if int(v) != v or not 1 <= v <= n:
            raise IndexOutOfRange(f"follower id {v!r} outside 1..{n}")
        return int(v)

    def _weight(w: float, what: str) -> float:
        w = float(w)
        if not np.isfinite(w) or w <= 0:
            raise NonPositiveWeight(f"{what} has non-positive weight {w!r}")
        return w

    edge_map: dict[tuple[int, int], float] = {}
    for item in edges:
        i, j = _node(item[0]), _node(item[1])
        w = _weight(item[2] if len(item) > 2 else 1.0, f"edge ({i}, {j})")
        if i == j:
            raise SelfLoop(f"self-loop on follower {i}")
        key = (min(i, j), max(i, j))
        if key in edge_map:
            raise DuplicateEdge(f"edge {key} given more than once")
        edge_map[key] = w

    links: dict[int, float] = {}
    for item in leader_links:
        i = _node(item[0])
        w = _weight(item[1] if len(item) > 1 else 1.0, f"leader link to {i}")
        if i in links:
            raise DuplicateEdge(f"leader link to follower {i} given more than once")
        links[i] = w
    return Topology(n, edge_map, links)


def chain_topology(n: int = 5) -> Topology:
    """Path 1-2-...-n with the leader linked to follower 1, unit weights.

    Default network of the reference scenario: the only requirement on it is
    that the leader talks to follower 1 alone, and a chain is the simplest
    connected graph that satisfies it.
    """
    return build_topology(n, [(i, i + 1) for i in range(1, n)], [(1, 1.0)])


@dataclass(frozen=True)
class GraphMatrices:
    L: np.ndarray
    B: np.ndarray
    H: np.ndarray
    h_eigenvalues: np.ndarray

    @property
    def positive_definite(self) -> bool:
        return bool(self.h_eigenvalues[0] > PD_TOL)


def graph_matrices(t: Topology) -> GraphMatrices:
    L = t.laplacian
    B = np.diag(t.leader_weights)
    H = L + B
    lam = np.linalg.eigvalsh(H)
    return GraphMatrices(_frozen(L), _frozen(B), _frozen(H), _frozen(np.sort(lam)))


def leader_globally_reachable(t: Topology) -> bool:
    """True iff every follower has a path to the leader (node 0)."""
    seen = {0}
    queue = deque([0])
    while queue:
        v = queue.popleft()
        if v == 0:
            nxt = t.informed
        else:
            nxt = t.neighbors(v)
        for w in nxt:
            if w not in seen:
                seen.add(w)
                queue.append(w)
    return len(seen) == t.n_followers + 1
