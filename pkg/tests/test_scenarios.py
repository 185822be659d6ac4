import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from syncnet.graphs import check_joint_connectivity, has_directed_spanning_tree, union_graph
from syncnet.scenarios import (
    PRESETS,
    InitialState,
    Scenario,
    preset,
    random_instance,
    scenario_from_json,
    scenario_to_json,
)
from syncnet.simulate import LinearNetworkSystem, NonlinearNetworkSystem, integrate


@pytest.mark.parametrize("name", sorted(PRESETS))
def test_preset_round_trips_through_json(name):
    sc = preset(name)
    back = scenario_from_json(json.loads(sc.to_json()))
    assert back.name == sc.name
    assert back.expected == sc.expected
    assert back.sig == sc.sig
    assert [g.edges for g in back.graphs] == [g.edges for g in sc.graphs]
    np.testing.assert_array_equal(back.initial_state(4), sc.initial_state(4))
    assert type(back.system) is type(sc.system)
    assert back.system.phi == sc.system.phi
    assert back.dt == sc.dt and back.max_norm == sc.max_norm


@pytest.mark.parametrize("name", sorted(PRESETS))
def test_presets_are_jointly_connected_or_flagged(name):
    sc = preset(name)
    connected = has_directed_spanning_tree(union_graph(sc.graphs))
    if sc.expected == "sync":
        assert connected
        window = sum(b - a for a, b, _ in list(sc.sig.dwells())[: len(sc.graphs)])
        assert check_joint_connectivity(sc.sig, sc.graphs, window)


def test_unknown_preset_lists_names():
    with pytest.raises(KeyError, match="example1"):
        preset("nope")


def test_preset_parameters():
    sc = preset("example5-positive")
    assert isinstance(sc.system, LinearNetworkSystem)
    assert sc.system.phi == 5.0 and sc.sig.t_min == 1.0 and sc.sig.horizon == 30.0
    x0 = sc.initial_state(3)
    assert x0.shape == (12,) and x0.min() >= 0 and x0.max() <= 50
    vdp = preset("example7-vanderpol")
    assert isinstance(vdp.system, NonlinearNetworkSystem)
    np.testing.assert_array_equal(vdp.system.Gamma, np.diag([0.5, 0.9]))
    assert vdp.sig.t_min == 0.5
    assert np.abs(vdp.initial_state(0)).max() <= 50


def test_initial_state_validation():
    with pytest.raises(ValueError):
        InitialState(values=(1.0, 2.0)).sample(3)
    with pytest.raises(ValueError):
        InitialState.from_json({})


def test_scenario_rejects_unknown_expectation():
    sc = preset("example1")
    with pytest.raises(ValueError):
        Scenario("x", sc.system, sc.x0, "maybe")


def test_scenario_json_errors():
    d = scenario_to_json(preset("example1"))
    bad = dict(d)
    del bad["system"]
    with pytest.raises(ValueError, match="system"):
        scenario_from_json(bad)
    bad = json.loads(json.dumps(d))
    bad["system"]["type"] = "quantum"
    with pytest.raises(ValueError):
        scenario_from_json(bad)
    bad = json.loads(json.dumps(d))
    bad["system"] = {"type": "nonlinear", "f": "unknown", "Gamma": [[1]], "phi": 1}
    with pytest.raises(ValueError, match="agent map"):
        scenario_from_json(bad)


def test_two_agent_preset_rate():
    from syncnet.simulate import convergence_rate

    sc = preset("two-agent-integrator")
    tr = integrate(sc.system, sc.initial_state())
    assert convergence_rate(tr) == pytest.approx(sc.targets["rate"], abs=0.05)


def test_shared_common_node_preset_does_not_synchronize():
    sc = preset("example4")
    tr = integrate(sc.system, sc.initial_state())
    # the two roots never hear anybody and stay 2 apart
    assert tr.pairwise()[-1] == pytest.approx(2.0)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10 ** 6), st.integers(2, 6), st.integers(1, 3))
def test_random_instances_are_valid(seed, n_nodes, n_graphs):
    sc = random_instance(seed, n_nodes, n_graphs)
    assert len(sc.graphs) == n_graphs
    assert all(g.n_nodes == n_nodes for g in sc.graphs)
    assert has_directed_spanning_tree(union_graph(sc.graphs))
    assert sc.expected == "sync"
    again = random_instance(seed, n_nodes, n_graphs)
    assert [g.edges for g in again.graphs] == [g.edges for g in sc.graphs]


def test_random_instance_argument_checks():
    with pytest.raises(ValueError):
        random_instance(0, 1, 2)
    with pytest.raises(ValueError):
        random_instance(0, 3, 0)


def test_preset_matrices_golden():
    from syncnet.graphs import laplacian

    sc = preset("example5-positive")
    np.testing.assert_array_equal(sc.system.A, [[0, 1, 0], [1, 0, 0], [0, 0, -2]])
    np.testing.assert_array_equal(sc.system.B, [[1, 0], [0, 1], [0, 0]])
    np.testing.assert_array_equal(sc.system.K, [[1, 0, 0], [0, 1, 0]])
    La, Lb = (laplacian(g) for g in sc.graphs)
    np.testing.assert_array_equal(La, [[0, 0, 0, 0], [-1.2, 1.2, 0, 0], [0, 0, 0, 0], [0, -0.7, 0, 0.7]])
    np.testing.assert_array_equal(Lb, [[0, 0, 0, 0], [0, 0, 0, 0], [-0.5, 0, 0.5, 0], [0, 0, -1.3, 1.3]])
    np.testing.assert_array_equal(preset("example7-vanderpol").system.Gamma, [[0.5, 0], [0, 0.9]])
    L4 = laplacian(preset("example4").graphs[0])
    np.testing.assert_array_equal(L4, [[0, 0, 0], [0, 0, 0], [-1, -1, 2]])


@pytest.mark.parametrize("seed", range(100))
def test_random_instance_joint_kernel_clauses(seed):
    from syncnet.graphs import laplacian
    from syncnet.linalg import Subspace, nullspace, range_space, span_of

    sc = random_instance(seed, 2 + seed % 7, 1 + seed % 3)
    N = sc.graphs[0].n_nodes
    common = nullspace(np.vstack([laplacian(g) for g in sc.graphs]))
    assert common.equals(Subspace.span(np.ones(N)))
    # row spaces: the column-space reading fails for mutual pairs (see test_linalg)
    rows = span_of([range_space(laplacian(g).T) for g in sc.graphs])
    assert rows.dim == N - 1
    assert span_of([rows, Subspace.span(np.ones(N))]).dim == N
