"""Preset networks and random instances."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .graphs import (
    SwitchingSignal,
    WeightedDigraph,
    graph_from_json,
    graph_to_json,
    has_directed_spanning_tree,
    signal_from_json,
    signal_to_json,
    union_graph,
)
from .simulate import LinearNetworkSystem, NonlinearNetworkSystem

__all__ = [
    "Scenario",
    "InitialState",
    "PRESETS",
    "AGENT_MAPS",
    "preset",
    "random_instance",
    "random_graph",
    "scenario_to_json",
    "scenario_from_json",
    "vanderpol",
    "vanderpol_jacobian",
]


# -- agent maps ------------------------------------------------------------

def vanderpol(t, X):
    """Driven damped Van der Pol field for an ``(..., 2)`` array of states."""
    X = np.asarray(X, float)
    x1, x2 = X[..., 0], X[..., 1]
    return np.stack([x2 - x1 ** 3 / 3.0 - x1, -x1 + np.sin(t) * np.ones_like(x1)], axis=-1)


def vanderpol_jacobian(t, x):
    x1 = float(np.asarray(x)[0])
    return np.array([[-x1 ** 2 - 1.0, 1.0], [-1.0, 0.0]])


def _doubling(t, X):
    return 2.0 * np.asarray(X, float)


def _doubling_jacobian(t, x):
    return 2.0 * np.eye(np.asarray(x).size)


# name -> (vectorized map, jacobian)
AGENT_MAPS: dict[str, tuple[Callable, Callable]] = {
    "vanderpol": (vanderpol, vanderpol_jacobian),
    "doubling": (_doubling, _doubling_jacobian),
}


# -- scenario ----------------------------------------------------------------

@dataclass(frozen=True)
class InitialState:
    """Either an explicit vector or a uniform box sampled with a seed."""

    values: tuple | None = None
    low: float | None = None
    high: float | None = None
    seed: int = 0

    def sample(self, size: int, seed: int | None = None) -> np.ndarray:
        if self.values is not None:
            x = np.asarray(self.values, float)
            if x.shape != (size,):
                raise ValueError(f"explicit initial state has length {x.size}, expected {size}")
            return x.copy()
        rng = np.random.default_rng(self.seed if seed is None else seed)
        return rng.uniform(self.low, self.high, size)

    def to_json(self) -> dict:
        if self.values is not None:
            return {"values": list(self.values)}
        return {"box": [self.low, self.high], "seed": self.seed}

    @classmethod
    def from_json(cls, d: dict) -> "InitialState":
        if "values" in d:
            return cls(values=tuple(float(v) for v in d["values"]))
        if "box" in d:
            lo, hi = d["box"]
            return cls(low=float(lo), high=float(hi), seed=int(d.get("seed", 0)))
        raise ValueError("x0 needs either 'values' or 'box'")


@dataclass
class Scenario:
    """A network, its initial state and the expected qualitative outcome.

    Attributes
    ----------
    expected : {"sync", "no-sync"}
    targets : dict
        Optional quantitative expectations, e.g. ``{"rate": -2.0}``.
    dt, max_norm : float, optional
        Integration settings recommended for this scenario.
    agent_map : str, optional
        Registry key of the nonlinear agent map.
    """

    name: str
    system: LinearNetworkSystem | NonlinearNetworkSystem
    x0: InitialState
    expected: str
    targets: dict = field(default_factory=dict)
    notes: str = ""
    dt: float | None = None
    max_norm: float = 1e12
    agent_map: str | None = None

    def __post_init__(self):
        if self.expected not in ("sync", "no-sync"):
            raise ValueError("expected must be 'sync' or 'no-sync'")

    @property
    def graphs(self) -> list[WeightedDigraph]:
        return self.system.graphs

    @property
    def sig(self) -> SwitchingSignal:
        return self.system.sig

    @property
    def state_dim(self) -> int:
        return self.system.N * self.system.n

    def initial_state(self, seed: int | None = None) -> np.ndarray:
        return self.x0.sample(self.state_dim, seed)

    def to_json(self) -> str:
        return json.dumps(scenario_to_json(self), indent=2)


def _lin(A, B, K, phi, graphs, sig):
    return LinearNetworkSystem(np.array(A, float), np.array(B, float), np.array(K, float),
                               phi, graphs, sig)


def _integrator(graphs, sig, phi=1.0):
    return _lin([[0.0]], [[1.0]], [[1.0]], phi, graphs, sig)


def _g(n, edges):
    # 1-based (target, source, weight) as printed in the matrices
    return WeightedDigraph(n, [(i - 1, j - 1, w) for i, j, w in edges])


EXAMPLE1_GRAPHS = lambda: [_g(4, [(2, 1, 1.0)]), _g(4, [(3, 1, 1.0), (4, 3, 1.0)])]  # noqa: E731
EXAMPLE3_GRAPHS = lambda: [_g(4, [(2, 1, 1.0), (4, 1, 1.0)]), _g(4, [(3, 1, 1.0), (4, 3, 1.0)])]  # noqa: E731
EXAMPLE4_GRAPH = lambda: _g(3, [(3, 1, 1.0), (3, 2, 1.0)])  # noqa: E731
EXAMPLE5_GRAPHS = lambda: [_g(4, [(2, 1, 1.2), (4, 2, 0.7)]), _g(4, [(3, 1, 0.5), (4, 3, 1.3)])]  # noqa: E731

EXAMPLE5_A = [[0.0, 1.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, -2.0]]
EXAMPLE5_B = [[1.0, 0.0], [0.0, 1.0], [0.0, 0.0]]
EXAMPLE5_K = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]]
COUNTER_A = [[-1.0, 1.0, 0.0], [1.0, -1.0, 0.0], [0.0, 0.0, -2.0]]
COUNTER_B = [[1.0, 0.0], [0.0, 0.0], [0.0, 0.0]]
COUNTER_K = [[1.0, 1.0, 0.0], [0.0, 1.0, 0.0]]
VDP_GAMMA = [[0.5, 0.0], [0.0, 0.9]]


def _example1():
    sig = SwitchingSignal.periodic([0, 1], 1.0, 20.0)
    return Scenario("example1", _integrator(EXAMPLE1_GRAPHS(), sig),
                    InitialState(values=(0.0, 0.0, 0.7071, -0.7071)), "sync",
                    notes="scalar integrator agents on the two-graph pair")


def _example3():
    sig = SwitchingSignal.periodic([0, 1], 1.0, 20.0)
    return Scenario("example3", _integrator(EXAMPLE3_GRAPHS(), sig),
                    InitialState(low=-1.0, high=1.0, seed=0), "sync",
                    notes="scalar integrator agents; range spaces refine into e2, e4, e3")


def _example4():
    sig = SwitchingSignal.periodic([0], 1.0, 20.0)
    return Scenario("example4", _integrator([EXAMPLE4_GRAPH()], sig),
                    InitialState(values=(1.0, -1.0, 0.0)), "no-sync",
                    notes="two reaches share node 3; the graph has no spanning tree")


def _example5_positive():
    sig = SwitchingSignal.periodic([0, 1], 1.0, 30.0)
    return Scenario("example5-positive", _lin(EXAMPLE5_A, EXAMPLE5_B, EXAMPLE5_K, 5.0,
                                              EXAMPLE5_GRAPHS(), sig),
                    InitialState(low=0.0, high=50.0, seed=0), "sync",
                    targets={"pairwise_below": 1e-3, "at": 30.0},
                    notes="positive system; A has eigenvalue +1 so agent states grow "
                          "like e^t while their differences decay",
                    max_norm=1e20)


def _example5_counter():
    sig = SwitchingSignal.periodic([0, 1], 1.0, 50.0)
    return Scenario("example5-counterexample", _lin(COUNTER_A, COUNTER_B, COUNTER_K, 50.0,
                                                    EXAMPLE5_GRAPHS(), sig),
                    InitialState(low=0.0, high=50.0, seed=0), "no-sync",
                    notes="graphs taken from the four-node pair with printed Laplacians",
                    dt=0.005)


def _example7():
    sig = SwitchingSignal.periodic([0, 1], 0.5, 50.0)
    f, jac = AGENT_MAPS["vanderpol"]
    # Lipschitz bound of the field on |x_1| <= 50: ||J|| <= x_1^2 + 2
    sys = NonlinearNetworkSystem(f, np.array(VDP_GAMMA), 5.0, EXAMPLE5_GRAPHS(), sig,
                                 rho=50.0 ** 2 + 2.0, vectorized=True, jacobian=jac)
    return Scenario("example7-vanderpol", sys, InitialState(low=-50.0, high=50.0, seed=0),
                    "sync", targets={"pairwise_below": 1e-2, "at": 50.0},
                    notes="graph pair shared with example5; fine step needed for the "
                          "stiff cubic term at |x_1| = 50",
                    dt=1e-3, agent_map="vanderpol")


def _two_agent():
    g = WeightedDigraph(2, [(0, 1, 1.0), (1, 0, 1.0)])
    sig = SwitchingSignal.periodic([0], 1.0, 5.0)
    return Scenario("two-agent-integrator", _integrator([g], sig),
                    InitialState(values=(1.0, -1.0)), "sync", targets={"rate": -2.0})


PRESETS: dict[str, Callable[[], Scenario]] = {
    "example1": _example1,
    "example3": _example3,
    "example4": _example4,
    "example5-positive": _example5_positive,
    "example5-counterexample": _example5_counter,
    "example7-vanderpol": _example7,
    "two-agent-integrator": _two_agent,
}


def preset(name: str) -> Scenario:
    """Build a preset scenario by name."""
    try:
        return PRESETS[name]()
    except KeyError:
        raise KeyError(f"unknown preset {name!r}; valid names: {', '.join(PRESETS)}") from None


# -- random instances ------------------------------------------------------

def random_graph(rng: np.random.Generator, n_nodes: int, p_edge: float = 0.3,
                 weight_range: tuple[float, float] = (0.5, 2.0)) -> WeightedDigraph:
    """Each ordered pair gets an edge with probability ``p_edge``."""
    mask = rng.random((n_nodes, n_nodes)) < p_edge
    weights = rng.uniform(*weight_range, size=(n_nodes, n_nodes))
    np.fill_diagonal(mask, False)
    return WeightedDigraph.from_adjacency(np.where(mask, weights, 0.0))


def random_instance(seed: int, n_nodes: int, n_graphs: int, require_joint_tree: bool = True,
                    max_draws: int = 100_000) -> Scenario:
    """Random scalar-integrator network on ``n_graphs`` uniform random digraphs.

    With ``require_joint_tree`` whole collections are redrawn until their union
    has a directed spanning tree.
    """
    if n_nodes < 2:
        raise ValueError("n_nodes must be at least 2")
    if n_graphs < 1:
        raise ValueError("n_graphs must be positive")
    rng = np.random.default_rng(seed)
    for _ in range(max_draws):
        graphs = [random_graph(rng, n_nodes) for _ in range(n_graphs)]
        if not require_joint_tree or has_directed_spanning_tree(union_graph(graphs)):
            break
    else:
        raise RuntimeError(f"no jointly connected collection after {max_draws} draws")
    sig = SwitchingSignal.periodic(list(range(n_graphs)), 1.0, 5.0 * n_graphs)
    connected = has_directed_spanning_tree(union_graph(graphs))
    return Scenario(f"random-{seed}-{n_nodes}-{n_graphs}", _integrator(graphs, sig),
                    InitialState(low=-1.0, high=1.0, seed=seed),
                    "sync" if connected else "no-sync")


# -- serialization ---------------------------------------------------------

def _mat(a) -> list:
    return np.asarray(a, float).tolist()


def scenario_to_json(sc: Scenario) -> dict:
    sys = sc.system
    if isinstance(sys, LinearNetworkSystem):
        system = {"type": "linear", "A": _mat(sys.A), "B": _mat(sys.B), "K": _mat(sys.K),
                  "phi": sys.phi}
    else:
        if sc.agent_map is None:
            raise ValueError("nonlinear scenarios need a registered agent_map to serialize")
        system = {"type": "nonlinear", "f": sc.agent_map, "Gamma": _mat(sys.Gamma),
                  "phi": sys.phi, "rho": sys.rho}
    out = {
        "name": sc.name,
        "graphs": [graph_to_json(g) for g in sc.graphs],
        "schedule": signal_to_json(sc.sig),
        "system": system,
        "x0": sc.x0.to_json(),
        "expected": sc.expected,
        "targets": sc.targets,
        "notes": sc.notes,
        "max_norm": sc.max_norm,
    }
    if sc.dt is not None:
        out["dt"] = sc.dt
    return out


def scenario_from_json(data: dict | str) -> Scenario:
    """Inverse of :func:`scenario_to_json`; raises ``ValueError`` on bad fields."""
    if isinstance(data, str):
        data = json.loads(data)
    for key in ("graphs", "schedule", "system", "x0"):
        if key not in data:
            raise ValueError(f"scenario JSON is missing field {key!r}")
    graphs = [graph_from_json(g) for g in data["graphs"]]
    sig = signal_from_json(data["schedule"])
    s = data["system"]
    kind = s.get("type")
    agent_map = None
    if kind == "linear":
        for key in ("A", "B", "K", "phi"):
            if key not in s:
                raise ValueError(f"system block is missing field {key!r}")
        system = _lin(s["A"], s["B"], s["K"], float(s["phi"]), graphs, sig)
    elif kind == "nonlinear":
        name = s.get("f")
        if name not in AGENT_MAPS:
            raise ValueError(f"unknown agent map {name!r}; known: {', '.join(AGENT_MAPS)}")
        f, jac = AGENT_MAPS[name]
        system = NonlinearNetworkSystem(f, np.array(s["Gamma"], float), float(s["phi"]),
                                        graphs, sig, rho=s.get("rho"), vectorized=True,
                                        jacobian=jac)
        agent_map = name
    else:
        raise ValueError("system.type must be 'linear' or 'nonlinear'")
    return Scenario(
        name=data.get("name", "custom"),
        system=system,
        x0=InitialState.from_json(data["x0"]),
        expected=data.get("expected", "sync"),
        targets=data.get("targets", {}),
        notes=data.get("notes", ""),
        dt=data.get("dt"),
        max_norm=float(data.get("max_norm", 1e12)),
        agent_map=agent_map,
    )
