"""Fixed-step simulation of coupled agents under a switching topology."""
from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .graphs import ReachDecomposition, SwitchingSignal, WeightedDigraph, reach_decomposition
from .linalg import beta_vectors, delta_projector, reduced_laplacian

__all__ = [
    "LinearNetworkSystem",
    "NonlinearNetworkSystem",
    "Trajectory",
    "DivergenceError",
    "integrate",
    "integrate_sync_error",
    "pairwise_from_error",
    "sync_error",
    "delta_error",
    "pairwise_deviation",
    "linearized_delta_step",
    "finite_difference_jacobian",
    "convergence_rate",
    "log_slope",
    "write_trajectory_csv",
]

MAX_NORM = 1e12


def _check_graphs(graphs, sig):
    if not graphs:
        raise ValueError("at least one graph is required")
    N = graphs[0].n_nodes
    if any(g.n_nodes != N for g in graphs):
        raise ValueError("all graphs must have the same number of nodes")
    if max(sig.graph_indices) >= len(graphs):
        raise ValueError("switching signal refers to a graph that was not supplied")
    return N


@dataclass(eq=False)
class LinearNetworkSystem:
    """Agents ``x_i' = A x_i + phi B K sum_j a_ij (x_j - x_i)``."""

    A: np.ndarray
    B: np.ndarray
    K: np.ndarray
    phi: float
    graphs: Sequence[WeightedDigraph]
    sig: SwitchingSignal

    def __post_init__(self):
        self.A = np.atleast_2d(np.asarray(self.A, float))
        self.B = np.atleast_2d(np.asarray(self.B, float))
        self.K = np.atleast_2d(np.asarray(self.K, float))
        n = self.A.shape[0]
        if self.A.shape != (n, n):
            raise ValueError("A must be square")
        if self.B.shape[0] != n or self.K.shape != (self.B.shape[1], n):
            raise ValueError("B must be n x m and K must be m x n")
        if self.phi <= 0:
            raise ValueError("phi must be positive")
        self.graphs = list(self.graphs)
        self.N = _check_graphs(self.graphs, self.sig)
        self._mats: dict[int, np.ndarray] = {}

    @property
    def n(self) -> int:
        return self.A.shape[0]

    def matrix(self, p: int) -> np.ndarray:
        """Closed-loop stacked matrix while graph ``p`` is active."""
        if p not in self._mats:
            L = self.graphs[p].laplacian
            self._mats[p] = np.kron(np.eye(self.N), self.A) - self.phi * np.kron(L, self.B @ self.K)
        return self._mats[p]

    def rhs(self, t: float, x: np.ndarray, p: int) -> np.ndarray:
        return self.matrix(p) @ x


@dataclass(eq=False)
class NonlinearNetworkSystem:
    """Agents ``x_i' = f(t, x_i) - phi Gamma sum_j a_ij (x_i - x_j)``.

    Parameters
    ----------
    f : callable
        ``f(t, x_i)`` returning an ``n``-vector. With ``vectorized=True`` it
        receives all agents at once as an ``(N, n)`` array.
    Gamma : (n, n) array
        Positive diagonal inner coupling.
    rho : float, optional
        Claimed Lipschitz constant of ``f``.
    jacobian : callable, optional
        ``jacobian(t, x_i)`` returning ``n x n``; finite differences otherwise.
    """

    f: Callable
    Gamma: np.ndarray
    phi: float
    graphs: Sequence[WeightedDigraph]
    sig: SwitchingSignal
    rho: float | None = None
    vectorized: bool = False
    jacobian: Callable | None = None
    n_state: int | None = None

    def __post_init__(self):
        self.Gamma = np.atleast_2d(np.asarray(self.Gamma, float))
        d = np.diag(self.Gamma)
        if np.any(self.Gamma != np.diag(d)) or np.any(d <= 0):
            raise ValueError("Gamma must be diagonal with positive entries")
        if self.phi <= 0:
            raise ValueError("phi must be positive")
        if self.rho is not None and self.rho <= 0:
            raise ValueError("rho must be positive")
        self.graphs = list(self.graphs)
        self.N = _check_graphs(self.graphs, self.sig)
        self._couple: dict[int, np.ndarray] = {}

    @property
    def n(self) -> int:
        return self.Gamma.shape[0]

    def coupling(self, p: int) -> np.ndarray:
        if p not in self._couple:
            self._couple[p] = self.phi * np.kron(self.graphs[p].laplacian, self.Gamma)
        return self._couple[p]

    def drift(self, t: float, x: np.ndarray) -> np.ndarray:
        """Stacked uncoupled dynamics ``F(t, x)``."""
        X = x.reshape(self.N, self.n)
        if self.vectorized:
            return np.asarray(self.f(t, X), float).reshape(-1)
        return np.concatenate([np.asarray(self.f(t, xi), float) for xi in X])

    def rhs(self, t: float, x: np.ndarray, p: int) -> np.ndarray:
        return self.drift(t, x) - self.coupling(p) @ x


@dataclass
class Trajectory:
    """Sampled states of a simulation.

    ``states[k]`` is the stacked state at ``times[k]``; ``graph_index[k]`` is
    the graph active on the step that starts at ``times[k]`` (the last sample
    repeats the final graph). Every switch instant is a sample instant.
    """

    times: np.ndarray
    states: np.ndarray
    switch_events: list
    graph_index: np.ndarray
    n: int
    n_nodes: int
    diverged: bool = False

    @property
    def final_state(self) -> np.ndarray:
        return self.states[-1]

    def error_norms(self) -> np.ndarray:
        return np.linalg.norm(sync_error(self.states, self.n), axis=-1)

    def pairwise(self) -> np.ndarray:
        return np.array([pairwise_deviation(x, self.n) for x in self.states])

    def delta_norms(self, graphs: Sequence[WeightedDigraph]) -> np.ndarray:
        cache: dict[int, np.ndarray] = {}
        out = np.empty(len(self.times))
        for k, (x, p) in enumerate(zip(self.states, self.graph_index)):
            if p not in cache:
                cache[p] = delta_projector(graphs[p].laplacian, self.n)
            out[k] = np.linalg.norm(cache[p] @ x)
        return out

    def at(self, t: float) -> np.ndarray:
        """State at the sample closest to ``t``."""
        return self.states[int(np.argmin(np.abs(self.times - t)))]


class DivergenceError(RuntimeError):
    """State norm exceeded the cutoff; ``trajectory`` holds the samples so far."""

    def __init__(self, message: str, trajectory: Trajectory):
        super().__init__(message)
        self.trajectory = trajectory


def _rk4_matrix(M: np.ndarray, h: float) -> np.ndarray:
    hM = h * M
    I = np.eye(M.shape[0])
    hM2 = hM @ hM
    hM3 = hM2 @ hM
    return I + hM + hM2 / 2.0 + hM3 / 6.0 + hM3 @ hM / 24.0


def _step_grid(a: float, b: float, dt: float) -> list[float]:
    length = b - a
    n_full = int(math.floor(length / dt + 1e-9))
    pts = [a + k * dt for k in range(n_full + 1)]
    if b - pts[-1] > 1e-12 * max(1.0, abs(b)):
        pts.append(b)
    else:
        pts[-1] = b
    return pts


def integrate(sys: LinearNetworkSystem | NonlinearNetworkSystem, x0, dt: float | None = None,
              horizon: float | None = None, max_norm: float = MAX_NORM,
              record_every: int = 1) -> Trajectory:
    """Classic RK4 with steps aligned to the switch instants.

    Parameters
    ----------
    dt : float, optional
        Step size, default ``t_min / 50``; must not exceed ``t_min / 10``.
    horizon : float, optional
        End time, at most the signal's horizon (the default).
    record_every : int
        Keep every k-th step inside a dwell; switch instants are always kept.

    Raises
    ------
    DivergenceError
        If the state norm exceeds ``max_norm``.
    """
    sig = sys.sig
    dt = sig.t_min / 50.0 if dt is None else float(dt)
    if dt <= 0:
        raise ValueError("dt must be positive")
    if dt > sig.t_min / 10.0 * (1 + 1e-12):
        raise ValueError(f"dt={dt} exceeds t_min/10={sig.t_min / 10.0}")
    horizon = sig.horizon if horizon is None else float(horizon)
    if horizon <= 0 or horizon > sig.horizon * (1 + 1e-12):
        raise ValueError(f"horizon must lie in (0, {sig.horizon}]")
    x = np.asarray(x0, float).copy()
    N, n = sys.N, sys.n
    if x.shape != (N * n,):
        raise ValueError(f"x0 must have length {N * n}")
    if not np.all(np.isfinite(x)):
        raise ValueError("x0 must be finite")

    linear = isinstance(sys, LinearNetworkSystem)
    step_cache: dict[tuple[int, float], np.ndarray] = {}
    times = [0.0]
    states = [x.copy()]
    gidx: list[int] = []
    events = []

    def partial(msg):
        gidx.append(gidx[-1] if gidx else sig.schedule[0][1])
        traj = Trajectory(np.array(times), np.array(states), events, np.array(gidx), n, N, True)
        return DivergenceError(msg, traj)

    for a, b, p in sig.dwells():
        if a >= horizon:
            break
        b = min(b, horizon)
        events.append((a, p))
        grid = _step_grid(a, b, dt)
        for k, (t0, t1) in enumerate(zip(grid, grid[1:])):
            h = t1 - t0
            if linear:
                key = (p, round(h, 14))
                if key not in step_cache:
                    step_cache[key] = _rk4_matrix(sys.matrix(p), h)
                x = step_cache[key] @ x
            else:
                k1 = sys.rhs(t0, x, p)
                k2 = sys.rhs(t0 + h / 2, x + h / 2 * k1, p)
                k3 = sys.rhs(t0 + h / 2, x + h / 2 * k2, p)
                k4 = sys.rhs(t1, x + h * k3, p)
                x = x + h / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
            last = k == len(grid) - 2
            if last or (k + 1) % record_every == 0:
                gidx.append(p)
                times.append(t1)
                states.append(x.copy())
            nrm = np.linalg.norm(x)
            if not np.isfinite(nrm) or nrm > max_norm:
                if not (last or (k + 1) % record_every == 0):
                    gidx.append(p)
                    times.append(t1)
                    states.append(x.copy())
                raise partial(f"state norm {nrm:.3g} exceeded {max_norm:.3g} at t={t1:.6g}")
    gidx.append(gidx[-1])
    return Trajectory(np.array(times), np.array(states), events, np.array(gidx), n, N)


def integrate_sync_error(sys: LinearNetworkSystem, x0, dt: float | None = None,
                         horizon: float | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Integrate the closed error dynamics of a linear network.

    ``e' = (I⊗A - phi L̃_p⊗BK) e`` with ``L̃_p`` the reduced Laplacian. Working
    in error coordinates avoids the cancellation that differencing large,
    nearly equal agent states suffers when ``A`` is unstable.

    Returns
    -------
    times, errors : ndarray
        Sample instants and error vectors of length ``(N-1) n``.
    """
    sig = sys.sig
    dt = sig.t_min / 50.0 if dt is None else float(dt)
    if dt <= 0 or dt > sig.t_min / 10.0 * (1 + 1e-12):
        raise ValueError("dt must lie in (0, t_min/10]")
    horizon = sig.horizon if horizon is None else float(horizon)
    N, n = sys.N, sys.n
    e = sync_error(np.asarray(x0, float), n)
    mats: dict[int, np.ndarray] = {}
    steps: dict[tuple[int, float], np.ndarray] = {}
    times = [0.0]
    out = [e.copy()]
    for a, b, p in sig.dwells():
        if a >= horizon:
            break
        if p not in mats:
            Lr = reduced_laplacian(sys.graphs[p].laplacian)
            mats[p] = np.kron(np.eye(N - 1), sys.A) - sys.phi * np.kron(Lr, sys.B @ sys.K)
        grid = _step_grid(a, min(b, horizon), dt)
        for t0, t1 in zip(grid, grid[1:]):
            key = (p, round(t1 - t0, 14))
            if key not in steps:
                steps[key] = _rk4_matrix(mats[p], t1 - t0)
            e = steps[key] @ e
            times.append(t1)
            out.append(e.copy())
    return np.array(times), np.array(out)


def pairwise_from_error(e, n: int) -> float:
    """Pairwise deviation recovered from ``e = (x_1 - x_j)_j``."""
    E = np.asarray(e, float).reshape(-1, n)
    # x_j - x_1 = -e_j, with x_1 itself at the origin
    return pairwise_deviation(np.vstack([np.zeros((1, n)), -E]), n)


# -- error signals ----------------------------------------------------------

def sync_error(x, n: int) -> np.ndarray:
    """Stacked differences ``x_1 - x_j`` for ``j = 2..N``.

    Accepts a single state or an array of states along the last axis.
    """
    x = np.asarray(x, float)
    N = x.shape[-1] // n
    if N * n != x.shape[-1]:
        raise ValueError("state length is not a multiple of n")
    X = x.reshape(x.shape[:-1] + (N, n))
    E = X[..., :1, :] - X[..., 1:, :]
    return E.reshape(x.shape[:-1] + ((N - 1) * n,))


def delta_error(x, L, rd: ReachDecomposition | None = None, n: int = 1,
                check: bool = True) -> np.ndarray:
    """δ-error ``M x`` with ``M = (I - sum_j gamma_j beta_j^T) ⊗ I_n``."""
    x = np.asarray(x, float)
    L = np.asarray(L, float)
    if rd is None:
        rd = reach_decomposition(WeightedDigraph.from_laplacian(L))
    M = delta_projector(L, n, rd)
    d = M @ x
    if check:
        scale = 1e-8 * max(1.0, float(np.linalg.norm(x)))
        for b in beta_vectors(L, rd):
            if np.linalg.norm(np.kron(b, np.eye(n)) @ d) > scale:
                raise ArithmeticError("δ-error has a component along a left kernel vector")
        if np.linalg.norm(M @ d - d) > scale:
            raise ArithmeticError("δ-error is not a fixed point of its projector")
    return d


def pairwise_deviation(x, n: int = 1) -> float:
    """``max_{i<j} ||x_i - x_j||``."""
    X = np.asarray(x, float).reshape(-1, n)
    if X.shape[0] < 2:
        return 0.0
    diff = X[:, None, :] - X[None, :, :]
    return float(np.sqrt((diff ** 2).sum(axis=-1)).max())


def finite_difference_jacobian(f: Callable, x) -> np.ndarray:
    """Central differences with step ``1e-6 (1 + ||x||)``."""
    x = np.asarray(x, float)
    h = 1e-6 * (1.0 + np.linalg.norm(x))
    cols = []
    for k in range(x.size):
        e = np.zeros_like(x)
        e[k] = h
        cols.append((np.asarray(f(x + e), float) - np.asarray(f(x - e), float)) / (2 * h))
    return np.column_stack(cols)


def linearized_delta_step(x, L, jac: Callable | None, Gamma, phi: float, n: int,
                          f: Callable | None = None, rho: float | None = None) -> np.ndarray:
    """Local δ-dynamics ``D_f δ - phi (L ⊗ Gamma) δ`` at state ``x``.

    ``D_f`` is block diagonal with the agent Jacobians, given by ``jac(x_i)``
    or by central differences of ``f``. Warns when ``||D_f||`` exceeds ``rho``.
    """
    x = np.asarray(x, float)
    L = np.asarray(L, float)
    Gamma = np.atleast_2d(np.asarray(Gamma, float))
    if jac is None:
        if f is None:
            raise ValueError("either jac or f must be supplied")
        jac = lambda xi: finite_difference_jacobian(f, xi)  # noqa: E731
    blocks = [np.atleast_2d(np.asarray(jac(xi), float)) for xi in x.reshape(-1, n)]
    Df = np.zeros((x.size, x.size))
    for i, J in enumerate(blocks):
        Df[i * n:(i + 1) * n, i * n:(i + 1) * n] = J
    if rho is not None:
        worst = max(np.linalg.norm(J, 2) for J in blocks)
        if worst > rho:
            warnings.warn(f"Jacobian norm {worst:.4g} exceeds the Lipschitz claim {rho:.4g}",
                          stacklevel=2)
    d = delta_error(x, L, n=n)
    return Df @ d - phi * np.kron(L, Gamma) @ d


def convergence_rate(traj: Trajectory, metric: str = "sync_error") -> float:
    """Least-squares slope of ``ln(metric)`` over the trailing half of ``traj``.

    Returns ``-inf`` when the metric drops below ``1e-14`` there.
    """
    if metric == "sync_error":
        values = traj.error_norms()
    elif metric == "pairwise":
        values = traj.pairwise()
    else:
        raise ValueError("metric must be 'sync_error' or 'pairwise'")
    return log_slope(traj.times, values)


def log_slope(times, values) -> float:
    """Slope of ``ln(values)`` against ``times`` over the trailing half.

    ``-inf`` once the values fall below ``1e-14`` there.
    """
    t = np.asarray(times, float)
    values = np.asarray(values, float)
    keep = t >= t[0] + 0.5 * (t[-1] - t[0])
    if keep.sum() < 2:
        raise ValueError("trajectory too short to estimate a rate")
    v = values[keep]
    if np.min(v) < 1e-14:
        return -math.inf
    slope, _ = np.polyfit(t[keep], np.log(v), 1)
    return float(slope)


def write_trajectory_csv(traj: Trajectory, path, graphs: Sequence[WeightedDigraph] | None = None) -> tuple[Path, Path]:
    """Write the trajectory CSV and a ``*_switches.csv`` sidecar.

    Columns: ``t, x_i_k..., e_norm, delta_norm, pairwise_dev`` (1-based
    agent/component ids). ``delta_norm`` is empty when ``graphs`` is omitted.
    Graph ids in the sidecar are 1-based.
    """
    path = Path(path)
    n, N = traj.n, traj.n_nodes
    header = ["t"] + [f"x_{i + 1}_{k + 1}" for i in range(N) for k in range(n)]
    header += ["e_norm", "delta_norm", "pairwise_dev"]
    e = traj.error_norms()
    pw = traj.pairwise()
    dn = traj.delta_norms(graphs) if graphs is not None else None
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for k, t in enumerate(traj.times):
            row = [repr(float(t))] + [repr(float(v)) for v in traj.states[k]]
            row += [repr(float(e[k])), "" if dn is None else repr(float(dn[k])), repr(float(pw[k]))]
            w.writerow(row)
    side = path.with_name(path.stem + "_switches.csv")
    with side.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "graph_id"])
        for t, p in traj.switch_events:
            w.writerow([repr(float(t)), p + 1])
    return path, side
