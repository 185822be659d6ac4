"""Weighted directed graphs, Laplacians and reach structure.

Conventions
-----------
Nodes are numbered ``0 .. N-1`` inside the library. An edge is stored as
``(target, source, weight)``: the weight ``a_ij`` sits in row ``i`` (the
receiving agent) and column ``j`` (the sending agent), so information flows
``j -> i``. JSON files use 1-based node and graph ids; conversion happens in
:func:`graph_from_json` / :func:`graph_to_json` and the signal counterparts.
"""
from __future__ import annotations

import bisect
import json
from collections import deque
from dataclasses import dataclass, field
from functools import cached_property
from typing import Sequence

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components

__all__ = [
    "WeightedDigraph",
    "ReachDecomposition",
    "SwitchingSignal",
    "laplacian",
    "union_graph",
    "reachable_from",
    "has_directed_spanning_tree",
    "reach_decomposition",
    "check_joint_connectivity",
    "graph_from_json",
    "graph_to_json",
    "signal_from_json",
    "signal_to_json",
]


@dataclass(frozen=True, eq=False)
class WeightedDigraph:
    """Immutable weighted digraph on ``n_nodes`` nodes.

    Parameters
    ----------
    n_nodes : int
        Number of nodes ``N``.
    edges : iterable of (target, source, weight)
        0-based endpoints; ``weight > 0``. Repeated pairs are summed.
    """

    n_nodes: int
    edges: tuple = field(default=())

    def __post_init__(self):
        n = int(self.n_nodes)
        if n < 1:
            raise ValueError(f"n_nodes must be positive, got {self.n_nodes}")
        merged: dict[tuple[int, int], float] = {}
        for edge in self.edges:
            if len(edge) != 3:
                raise ValueError(f"edge must be (target, source, weight), got {edge!r}")
            i, j, w = int(edge[0]), int(edge[1]), float(edge[2])
            if not (0 <= i < n and 0 <= j < n):
                raise ValueError(f"edge {edge!r} has a node outside [0, {n - 1}]")
            if i == j:
                raise ValueError(f"self-loop at node {i} is not allowed")
            if not np.isfinite(w) or w <= 0.0:
                raise ValueError(f"edge weight must be finite and > 0, got {w}")
            merged[(i, j)] = merged.get((i, j), 0.0) + w
        object.__setattr__(self, "n_nodes", n)
        object.__setattr__(
            self, "edges", tuple((i, j, w) for (i, j), w in sorted(merged.items()))
        )

    @classmethod
    def from_adjacency(cls, W) -> "WeightedDigraph":
        """Build from an adjacency matrix with ``W[i, j] = a_ij``."""
        W = np.asarray(W, dtype=float)
        if W.ndim != 2 or W.shape[0] != W.shape[1]:
            raise ValueError("adjacency matrix must be square")
        if np.any(np.diag(W) != 0):
            raise ValueError("adjacency matrix must have a zero diagonal")
        if np.any(W < 0):
            raise ValueError("adjacency weights must be nonnegative")
        rows, cols = np.nonzero(W)
        return cls(W.shape[0], [(i, j, W[i, j]) for i, j in zip(rows, cols)])

    @classmethod
    def from_laplacian(cls, L, tol: float = 1e-12) -> "WeightedDigraph":
        """Recover the graph from its Laplacian (off-diagonal entries ``-a_ij``)."""
        L = np.asarray(L, dtype=float)
        W = -L.copy()
        np.fill_diagonal(W, 0.0)
        W[np.abs(W) <= tol] = 0.0
        return cls.from_adjacency(W)

    @cached_property
    def adjacency(self) -> np.ndarray:
        W = np.zeros((self.n_nodes, self.n_nodes))
        for i, j, w in self.edges:
            W[i, j] = w
        W.flags.writeable = False
        return W

    @cached_property
    def laplacian(self) -> np.ndarray:
        W = self.adjacency
        L = np.diag(W.sum(axis=1)) - W
        L.flags.writeable = False
        return L

    @cached_property
    def successors(self) -> tuple[tuple[int, ...], ...]:
        """``successors[j]`` lists nodes that receive information from ``j``."""
        out: list[list[int]] = [[] for _ in range(self.n_nodes)]
        for i, j, _ in self.edges:
            out[j].append(i)
        return tuple(tuple(s) for s in out)

    def __repr__(self):
        return f"WeightedDigraph(n_nodes={self.n_nodes}, edges={list(self.edges)})"


def laplacian(g: WeightedDigraph) -> np.ndarray:
    """Return ``L = diag(row sums of W) - W`` (read-only, cached on ``g``)."""
    return g.laplacian


def union_graph(gs: Sequence[WeightedDigraph]) -> WeightedDigraph:
    """Union of graphs on a common node set.

    Edge sets are united and the weights of an edge present in several graphs
    are summed, so ``laplacian(union_graph(gs)) == sum(laplacian(g))``.
    """
    gs = list(gs)
    if not gs:
        raise ValueError("union of an empty collection is undefined")
    n = gs[0].n_nodes
    for g in gs[1:]:
        if g.n_nodes != n:
            raise ValueError(
                f"dimension mismatch: graphs have {n} and {g.n_nodes} nodes"
            )
    return WeightedDigraph(n, [e for g in gs for e in g.edges])


def reachable_from(g: WeightedDigraph, root: int) -> frozenset[int]:
    """Nodes with a directed path from ``root`` (``root`` included)."""
    seen = {root}
    queue = deque([root])
    succ = g.successors
    while queue:
        u = queue.popleft()
        for v in succ[u]:
            if v not in seen:
                seen.add(v)
                queue.append(v)
    return frozenset(seen)


def has_directed_spanning_tree(g: WeightedDigraph) -> bool:
    """True iff some node has a directed path to every other node."""
    n = g.n_nodes
    return any(len(reachable_from(g, r)) == n for r in range(n))


@dataclass(frozen=True)
class ReachDecomposition:
    """Reaches of a digraph together with its Frobenius block ordering.

    Attributes
    ----------
    reaches, exclusive, common : tuple of frozenset
        ``R_i``, ``H_i = R_i minus all other reaches`` and ``C_i = R_i - H_i``.
        Reach ``i`` is rooted at closed strongly connected block ``i``.
    blocks : tuple of tuple
        Strongly connected components in Frobenius order: the ``chi`` closed
        components (no incoming edges from other components) first, then the
        rest in topological order. Permuting ``L`` by ``scc_order`` gives a
        block lower-triangular matrix.
    """

    n_nodes: int
    reaches: tuple
    exclusive: tuple
    common: tuple
    blocks: tuple

    @property
    def chi(self) -> int:
        return len(self.reaches)

    @property
    def scc_order(self) -> tuple[int, ...]:
        return tuple(v for b in self.blocks for v in b)

    @property
    def block_sizes(self) -> tuple[int, ...]:
        return tuple(len(b) for b in self.blocks)

    @property
    def closed_blocks(self) -> tuple:
        return self.blocks[: self.chi]

    def permutation_matrix(self) -> np.ndarray:
        """``P`` with ``P @ L @ P.T`` in Frobenius normal form."""
        P = np.zeros((self.n_nodes, self.n_nodes))
        P[np.arange(self.n_nodes), list(self.scc_order)] = 1.0
        return P


def _scc_labels(g: WeightedDigraph) -> tuple[int, np.ndarray]:
    # csgraph wants M[u, v] != 0 for an arc u -> v, i.e. the transpose of W
    M = csr_matrix((g.adjacency.T > 0).astype(float))
    return connected_components(M, directed=True, connection="strong")


def reach_decomposition(g: WeightedDigraph) -> ReachDecomposition:
    """Compute reaches, their exclusive/common parts and the Frobenius order."""
    n = g.n_nodes
    n_comp, labels = _scc_labels(g)
    members: list[list[int]] = [[] for _ in range(n_comp)]
    for v in range(n):
        members[labels[v]].append(v)

    indeg = [0] * n_comp
    children: list[set[int]] = [set() for _ in range(n_comp)]
    for i, j, _ in g.edges:
        ci, cj = labels[i], labels[j]
        if ci != cj and ci not in children[cj]:
            children[cj].add(ci)
            indeg[ci] += 1

    # deterministic: order components by their smallest node
    by_min = sorted(range(n_comp), key=lambda c: members[c][0])
    closed = [c for c in by_min if indeg[c] == 0]

    # Kahn's algorithm seeded with every closed component puts them first
    remaining = list(indeg)
    queue = deque(closed)
    order: list[int] = []
    while queue:
        c = queue.popleft()
        order.append(c)
        for d in sorted(children[c], key=lambda d: members[d][0]):
            remaining[d] -= 1
            if remaining[d] == 0:
                queue.append(d)

    reaches = [reachable_from(g, members[c][0]) for c in closed]
    count = np.zeros(n, dtype=int)
    for R in reaches:
        count[list(R)] += 1
    exclusive = [frozenset(v for v in R if count[v] == 1) for R in reaches]
    common = [R - H for R, H in zip(reaches, exclusive)]
    return ReachDecomposition(
        n_nodes=n,
        reaches=tuple(reaches),
        exclusive=tuple(exclusive),
        common=tuple(common),
        blocks=tuple(tuple(members[c]) for c in order),
    )


@dataclass(frozen=True)
class SwitchingSignal:
    """Right-continuous piecewise-constant graph schedule.

    ``schedule`` holds ``(start_time, graph_index)`` pairs; the graph with
    index ``schedule[k][1]`` is active on ``[schedule[k][0], schedule[k+1][0])``
    and the last one until ``horizon``. ``marks`` partitions ``[0, horizon]``
    into joint-connectivity windows ``[t_k, t_{k+1})``; every mark must be a
    switch instant. When ``marks`` is omitted, :meth:`windows` derives them
    greedily from the graphs.
    """

    schedule: tuple
    horizon: float
    t_min: float
    t_max: float
    marks: tuple | None = None

    def __post_init__(self):
        sched = tuple((float(t), int(p)) for t, p in self.schedule)
        object.__setattr__(self, "schedule", sched)
        if not sched:
            raise ValueError("schedule must not be empty")
        if sched[0][0] != 0.0:
            raise ValueError("first switch must start at t = 0")
        starts = [t for t, _ in sched]
        if any(b <= a for a, b in zip(starts, starts[1:])):
            raise ValueError("start times must be strictly increasing")
        if any(p < 0 for _, p in sched):
            raise ValueError("graph indices must be nonnegative")
        if self.t_min <= 0:
            raise ValueError("t_min must be positive")
        if self.t_max < self.t_min:
            raise ValueError("t_max must be at least t_min")
        if self.horizon <= starts[-1]:
            raise ValueError("horizon must exceed the last start time")
        tol = 1e-9 * max(1.0, self.horizon)
        for t0, t1 in zip(starts, starts[1:] + [self.horizon]):
            if t1 - t0 < self.t_min - tol:
                raise ValueError(
                    f"subinterval [{t0}, {t1}) is shorter than t_min={self.t_min}"
                )
        if self.marks is not None:
            marks = tuple(float(m) for m in self.marks)
            object.__setattr__(self, "marks", marks)
            self._check_marks(marks)

    def _check_marks(self, marks):
        tol = 1e-9 * max(1.0, self.horizon)
        if not marks or abs(marks[0]) > tol:
            raise ValueError("interval marks must start at 0")
        starts = self.switch_times
        for m in marks:
            if not any(abs(m - s) <= tol for s in starts) and abs(m - self.horizon) > tol:
                raise ValueError(f"interval mark {m} is not a switch instant")
        for a, b in zip(marks, marks[1:]):
            if b <= a:
                raise ValueError("interval marks must be increasing")
            if b - a > self.t_max + tol:
                raise ValueError(
                    f"window [{a}, {b}) is longer than t_max={self.t_max}"
                )

    @classmethod
    def periodic(cls, sequence: Sequence[int], dwell: float, horizon: float,
                 t_max: float | None = None) -> "SwitchingSignal":
        """Cycle through ``sequence`` with a fixed dwell time.

        Windows are the periods ``len(sequence) * dwell``.
        """
        sequence = list(sequence)
        n_dwell = int(np.ceil(horizon / dwell - 1e-9))
        schedule = [(k * dwell, sequence[k % len(sequence)]) for k in range(n_dwell)]
        period = dwell * len(sequence)
        n_win = int(np.floor(horizon / period + 1e-9))
        marks = [k * period for k in range(n_win + 1)]
        if horizon - marks[-1] > 1e-9 * max(1.0, horizon):
            marks.append(horizon)
        return cls(
            schedule=schedule,
            horizon=horizon,
            t_min=dwell,
            t_max=period if t_max is None else t_max,
            marks=tuple(marks),
        )

    def with_horizon(self, horizon: float) -> "SwitchingSignal":
        """Truncate, or repeat the schedule with period ``self.horizon``."""
        if horizon <= 0:
            raise ValueError("horizon must be positive")
        period = self.horizon
        sched: list[tuple[float, int]] = []
        marks: list[float] = []
        k = 0
        while k * period < horizon:
            off = k * period
            sched += [(off + t, p) for t, p in self.schedule if off + t < horizon]
            if self.marks is not None:
                marks += [off + m for m in self.marks if off + m < horizon and (k == 0 or m > 0)]
            k += 1
        # drop a final dwell shorter than t_min created by truncation
        while len(sched) > 1 and horizon - sched[-1][0] < self.t_min * (1 - 1e-9):
            sched.pop()
        if self.marks is not None:
            marks = [m for m in marks if m < horizon] + [float(horizon)]
            try:
                return SwitchingSignal(tuple(sched), float(horizon), self.t_min, self.t_max,
                                       tuple(marks))
            except ValueError:
                pass  # truncation broke a window; fall back to derived windows
        return SwitchingSignal(tuple(sched), float(horizon), self.t_min, self.t_max)

    @property
    def switch_times(self) -> tuple[float, ...]:
        return tuple(t for t, _ in self.schedule)

    @property
    def graph_indices(self) -> tuple[int, ...]:
        return tuple(p for _, p in self.schedule)

    def index_at(self, t: float) -> int:
        """Graph index active at time ``t`` (right-continuous)."""
        k = bisect.bisect_right(self.switch_times, t) - 1
        if k < 0:
            raise ValueError(f"time {t} precedes the schedule")
        return self.schedule[k][1]

    def dwells(self) -> list[tuple[float, float, int]]:
        """``(start, end, graph_index)`` for every subinterval."""
        starts = self.switch_times
        ends = starts[1:] + (self.horizon,)
        return [(a, b, p) for (a, p), b in zip(self.schedule, ends)]

    def windows(self, gs: Sequence[WeightedDigraph] | None = None) -> list[list[tuple[float, float, int]]]:
        """Group dwells into joint-connectivity windows.

        Uses ``marks`` when present. Otherwise dwells are accumulated until
        their union graph has a directed spanning tree, which requires ``gs``.
        A trailing group that never becomes connected is returned as the last
        window.
        """
        dwells = self.dwells()
        tol = 1e-9 * max(1.0, self.horizon)
        out: list[list[tuple[float, float, int]]] = []
        if self.marks is not None:
            bounds = list(self.marks)
            if abs(bounds[-1] - self.horizon) > tol:
                bounds.append(self.horizon)
            for a, b in zip(bounds, bounds[1:]):
                out.append([d for d in dwells if d[0] >= a - tol and d[1] <= b + tol])
            return [w for w in out if w]
        if gs is None:
            raise ValueError("graphs are needed to derive windows without marks")
        current: list[tuple[float, float, int]] = []
        for d in dwells:
            current.append(d)
            if has_directed_spanning_tree(union_graph([gs[p] for *_, p in current])):
                out.append(current)
                current = []
        if current:
            out.append(current)
        return out


def _graphs_in(sig: SwitchingSignal, t0: float, t1: float) -> set[int]:
    return {p for a, b, p in sig.dwells() if a < t1 and b > t0}


def check_joint_connectivity(sig: SwitchingSignal, gs: Sequence[WeightedDigraph],
                             T: float) -> bool:
    """Check that every window ``[t0, t0 + T)`` has a spanning-tree union.

    Window starts are taken at switch instants, at ``s - T`` for every switch
    ``s`` and on a grid of spacing ``t_min / 4``; the union graph only changes
    when an endpoint crosses a switch instant.
    """
    if T <= 0:
        raise ValueError(f"window length must be positive, got {T}")
    if max(sig.graph_indices) >= len(gs):
        raise ValueError("switching signal refers to a graph that was not supplied")
    last = sig.horizon - T
    if last <= 0:
        return has_directed_spanning_tree(union_graph([gs[p] for p in set(sig.graph_indices)]))
    candidates = set(np.arange(0.0, last, sig.t_min / 4.0).tolist())
    candidates.add(last)
    for s in sig.switch_times:
        for c in (s, s - T):
            if 0.0 <= c <= last:
                candidates.add(c)
    seen: dict[frozenset, bool] = {}
    for t0 in sorted(candidates):
        key = frozenset(_graphs_in(sig, t0, t0 + T))
        if key not in seen:
            seen[key] = has_directed_spanning_tree(union_graph([gs[p] for p in key]))
        if not seen[key]:
            return False
    return True


# -- JSON ------------------------------------------------------------------

def graph_to_json(g: WeightedDigraph) -> dict:
    return {"n": g.n_nodes, "edges": [[i + 1, j + 1, w] for i, j, w in g.edges]}


def graph_from_json(data: dict | str) -> WeightedDigraph:
    """Parse ``{"n": N, "edges": [[i, j, w], ...]}`` with 1-based ids."""
    if isinstance(data, str):
        data = json.loads(data)
    try:
        n = data["n"]
        edges = data["edges"]
    except KeyError as exc:
        raise ValueError(f"graph JSON is missing field {exc.args[0]!r}") from None
    parsed = []
    for k, e in enumerate(edges):
        if not isinstance(e, (list, tuple)) or len(e) != 3:
            raise ValueError(f"edges[{k}] must be [target, source, weight], got {e!r}")
        parsed.append((int(e[0]) - 1, int(e[1]) - 1, float(e[2])))
    return WeightedDigraph(int(n), parsed)


def signal_to_json(sig: SwitchingSignal) -> dict:
    out = {
        "t_min": sig.t_min,
        "t_max": sig.t_max,
        "horizon": sig.horizon,
        "schedule": [[t, p + 1] for t, p in sig.schedule],
    }
    if sig.marks is not None:
        out["marks"] = list(sig.marks)
    return out


def signal_from_json(data: dict | str) -> SwitchingSignal:
    """Parse ``{"t_min", "t_max", "horizon", "schedule": [[t, graph_id], ...]}``."""
    if isinstance(data, str):
        data = json.loads(data)
    missing = [k for k in ("t_min", "t_max", "horizon", "schedule") if k not in data]
    if missing:
        raise ValueError(f"schedule JSON is missing field {missing[0]!r}")
    sched = []
    for k, entry in enumerate(data["schedule"]):
        if not isinstance(entry, (list, tuple)) or len(entry) != 2:
            raise ValueError(f"schedule[{k}] must be [t, graph_id], got {entry!r}")
        sched.append((float(entry[0]), int(entry[1]) - 1))
    return SwitchingSignal(
        schedule=tuple(sched),
        horizon=float(data["horizon"]),
        t_min=float(data["t_min"]),
        t_max=float(data["t_max"]),
        marks=tuple(data["marks"]) if data.get("marks") is not None else None,
    )
