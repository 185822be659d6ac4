"""Checkers for convergence and divergence conditions of networked agents.

Sampling-based checks (Lipschitz projection, QUAD-inverse) are falsification
tests: a ``True`` verdict means no counterexample was found in the sampled box.
"""
from __future__ import annotations

import json
import math
import warnings
from dataclasses import asdict, dataclass, field
from typing import Callable, Sequence

import numpy as np
import scipy.linalg as sla

from .graphs import SwitchingSignal, WeightedDigraph, has_directed_spanning_tree, union_graph
from .linalg import (
    Subspace,
    complement_in,
    eigenstructure,
    observability_rank,
    projection_constants,
    reduced_laplacian,
    refine_to_direct_sum,
    span_of,
)

__all__ = [
    "ExpGrowthBound",
    "exp_growth_bound",
    "ConditionReport",
    "ConditionTerm",
    "condition_rows",
    "theorem1_check",
    "dwell_time_lower_bound",
    "Assumption5Result",
    "check_assumption5",
    "alpha_for_constrained_subspace",
    "growth_constants",
    "SamplingResult",
    "lipschitz_projection_check",
    "PhiThreshold",
    "phi_threshold",
    "quad_inverse_check",
    "quad_inverse_desync_threshold",
    "resolve_seed",
]

GRID_POINTS = 64
DEFECT_COND = 1e10


def resolve_seed(seed: int | None) -> int:
    """Explicit seed, else ``SYNCNET_SEED`` from the environment, else 0."""
    import os

    if seed is not None:
        return int(seed)
    env = os.environ.get("SYNCNET_SEED")
    return int(env) if env not in (None, "") else 0


# -- matrix exponential bounds ---------------------------------------------

@dataclass(frozen=True)
class ExpGrowthBound:
    """Certificate ``||exp(H t)|| <= upsilon * exp(xi * t)`` for ``t >= 0``."""

    upsilon: float
    xi: float
    method: str
    t_grid_max: float

    def __call__(self, t: float) -> float:
        return self.upsilon * math.exp(self.xi * t)


def _validate_bound(H: np.ndarray, upsilon: float, xi: float, t_max: float) -> None:
    for t in np.linspace(0.0, t_max, GRID_POINTS):
        actual = np.linalg.norm(sla.expm(H * t), 2) if H.size else 0.0
        if actual > upsilon * math.exp(xi * t) * (1 + 1e-6) + 1e-300:
            raise ArithmeticError(
                f"growth bound fails at t={t:.4g}: ||exp(Ht)||={actual:.6g} > "
                f"{upsilon:.6g}*exp({xi:.6g} t)"
            )


def exp_growth_bound(H, method: str = "eigen-conditioning", t_grid_max: float = 10.0) -> ExpGrowthBound:
    """Bound the matrix exponential of ``H`` by ``upsilon * exp(xi t)``.

    Parameters
    ----------
    H : (k, k) array
    method : {"eigen-conditioning", "log-norm"}
        ``log-norm`` uses the largest eigenvalue of the symmetric part with
        ``upsilon = 1``. ``eigen-conditioning`` uses the spectral abscissa and
        the 2-norm condition number of the (column-normalized) eigenvector
        matrix.
    t_grid_max : float
        The bound is checked at 64 points of ``[0, t_grid_max]``.

    Raises
    ------
    ValueError
        Unknown method, or eigen-conditioning on a numerically defective ``H``.
    """
    H = np.atleast_2d(np.asarray(H, dtype=float))
    if H.shape[0] != H.shape[1]:
        raise ValueError("H must be square")
    if t_grid_max <= 0:
        raise ValueError("t_grid_max must be positive")
    if H.size == 0:
        return ExpGrowthBound(1.0, -math.inf, method, t_grid_max)
    if method == "log-norm":
        upsilon = 1.0
        xi = float(np.linalg.eigvalsh((H + H.T) / 2.0)[-1])
    elif method == "eigen-conditioning":
        w, V = np.linalg.eig(H)
        V = V / np.linalg.norm(V, axis=0)
        s = np.linalg.svd(V, compute_uv=False)
        cond = s[0] / s[-1] if s[-1] > 0 else math.inf
        if not np.isfinite(cond) or cond > DEFECT_COND:
            raise ValueError("H is defective; eigen-conditioning bound is unavailable")
        upsilon = max(1.0, float(cond))
        xi = float(np.max(w.real))
    else:
        raise ValueError(f"unknown method {method!r}; use 'log-norm' or 'eigen-conditioning'")
    _validate_bound(H, upsilon, xi, t_grid_max)
    return ExpGrowthBound(upsilon, xi, method, t_grid_max)


def _bound_with_fallback(H: np.ndarray, method: str, t_max: float) -> ExpGrowthBound:
    try:
        return exp_growth_bound(H, method, t_max)
    except (ValueError, ArithmeticError):
        if method == "log-norm":
            raise
        return exp_growth_bound(H, "log-norm", t_max)


# -- the subspace convergence condition ------------------------------------

@dataclass(frozen=True)
class ConditionTerm:
    """One dwell's contribution ``ln(hbar) + lam * duration`` for one subspace."""

    window: int
    subspace: int
    graph: int
    hbar: float
    lam: float
    duration: float
    in_range: bool

    @property
    def value(self) -> float:
        return math.log(self.hbar) + self.lam * self.duration


@dataclass
class ConditionReport:
    """Outcome of the windowed subspace condition.

    ``per_window`` rows are ``(window, subspace, lhs, ln_gamma)``.
    """

    satisfied: bool
    per_window: list
    gamma: float
    hbar_values: list
    terms: list = field(default_factory=list)
    gamma_ceiling: float = math.inf
    diagnosis: str = ""

    def to_json(self) -> str:
        payload = {
            "satisfied": self.satisfied,
            "gamma": self.gamma,
            "gamma_ceiling": self.gamma_ceiling,
            "diagnosis": self.diagnosis,
            "per_window": [
                {"window": k, "subspace": i, "lhs": lhs, "ln_gamma": lg}
                for k, i, lhs, lg in self.per_window
            ],
            "hbar_values": self.hbar_values,
            "terms": [asdict(t) for t in self.terms],
        }
        return json.dumps(payload, indent=2, default=_json_default)

    def table(self) -> str:
        lines = [f"{'window':>6} {'subspace':>8} {'lhs':>12} {'ln gamma':>10} ok"]
        for k, i, lhs, lg in self.per_window:
            lines.append(f"{k:>6} {i:>8} {lhs:>12.5g} {lg:>10.5g} {'yes' if lhs < lg else 'no'}")
        lines.append(f"satisfied: {self.satisfied}")
        if self.diagnosis:
            lines.append(f"diagnosis: {self.diagnosis}")
        return "\n".join(lines)


def _json_default(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, float) and not math.isfinite(o):
        return str(o)
    raise TypeError(f"cannot serialize {type(o).__name__}")


def condition_rows(terms: Sequence[ConditionTerm], gamma: float) -> ConditionReport:
    """Sum the terms per (window, subspace) and compare with ``ln gamma``."""
    if not 0.0 < gamma < 1.0:
        raise ValueError(f"gamma must lie in (0, 1), got {gamma}")
    sums: dict[tuple[int, int], float] = {}
    for t in terms:
        key = (t.window, t.subspace)
        sums[key] = sums.get(key, 0.0) + t.value
    lg = math.log(gamma)
    rows = [(k, i, s, lg) for (k, i), s in sorted(sums.items())]
    return ConditionReport(
        satisfied=bool(rows) and all(s < lg for _, _, s, _ in rows),
        per_window=rows,
        gamma=gamma,
        hbar_values=[t.hbar for t in terms],
        terms=list(terms),
    )


@dataclass
class _GraphData:
    reduced: np.ndarray
    range_space: Subspace
    kernel_space: Subspace
    h1: ExpGrowthBound | None
    h2: ExpGrowthBound
    kappa_split: float
    hurwitz: bool
    h1_abscissa: float


def _graph_data(g: WeightedDigraph, A, B, K, phi, method, t_max) -> _GraphData:
    n = A.shape[0]
    Lr = reduced_laplacian(g.laplacian)
    es = eigenstructure(Lr)
    In = np.eye(n)
    R = Subspace(np.kron(es.nonzero_invariant_space.basis, In), orthonormal=True)
    Z = Subspace(np.kron(es.zero_generalized_space.basis, In), orthonormal=True,
                 ambient_dim=Lr.shape[0] * n)
    # ||exp(t I⊗A)|| = ||exp(t A)||
    h2 = _bound_with_fallback(A, method, t_max)
    h1 = None
    hurwitz = True
    abscissa = -math.inf
    if R.dim:
        Qr = es.nonzero_invariant_space.basis
        Lhat = Qr.T @ Lr @ Qr
        H1 = np.kron(np.eye(Lhat.shape[0]), A) - phi * np.kron(Lhat, B @ K)
        abscissa = float(np.max(np.linalg.eigvals(H1).real))
        hurwitz = abscissa < 0
        h1 = _bound_with_fallback(H1, method, t_max)
    T = np.hstack([R.basis, Z.basis])
    kappa = projection_constants(T, [R.dim, Z.dim]).kappa
    return _GraphData(Lr, R, Z, h1, h2, kappa, hurwitz, abscissa)


def theorem1_check(A, B, K, phi: float, sig: SwitchingSignal, gs: Sequence[WeightedDigraph],
                   gamma: float | None = None, method: str = "eigen-conditioning",
                   ratio: float = 1.0) -> ConditionReport:
    """Evaluate the windowed subspace condition for a linear network.

    For each graph the reduced Laplacian is split into its nonzero invariant
    space ``R_p`` and generalized kernel ``Z_p`` (tensored with ``R^n``). In
    every window the spaces ``R_p`` are refined into a direct sum
    ``S_1..S_d``. A subspace inside ``R_p`` uses the bound of
    ``I⊗A - phi L̂_p⊗BK`` and the projection constant of the window pieces
    inside ``R_p``; otherwise the bound of ``I⊗A`` is scaled by the constants
    of both the ``R_p ⊕ Z_p`` split and the window decomposition.

    Parameters
    ----------
    gamma : float, optional
        Defaults to ``0.9 / (N * kappa_max)``.
    ratio : float
        Initial-condition ratio fed to the projection constants.
    """
    A = np.atleast_2d(np.asarray(A, float))
    B = np.atleast_2d(np.asarray(B, float))
    K = np.atleast_2d(np.asarray(K, float))
    n = A.shape[0]
    if B.shape[0] != n or K.shape != (B.shape[1], n):
        raise ValueError("incompatible shapes for A, B, K")
    N = gs[0].n_nodes
    m = n * (N - 1)
    t_max = max(sig.t_max, 1.0)

    cache: dict[int, _GraphData] = {}

    def data(p: int) -> _GraphData:
        if p not in cache:
            cache[p] = _graph_data(gs[p], A, B, K, phi, method, t_max)
        return cache[p]

    windows = sig.windows(gs)
    used = sorted({p for w in windows for *_, p in w})
    bad = [p for p in used if not data(p).hurwitz]
    if bad:
        report = condition_rows([], 0.5 if gamma is None else gamma)
        report.satisfied = False
        report.diagnosis = (
            "range dynamics not Hurwitz for graph(s) "
            + ", ".join(f"{p + 1} (abscissa {data(p).h1_abscissa:.4g})" for p in bad)
            + "; choose K so that I⊗A - phi L̂⊗BK is Hurwitz"
        )
        return report

    terms: list[ConditionTerm] = []
    kappa_max = 1.0
    notes = []
    for k, window in enumerate(windows):
        graphs = list(dict.fromkeys(p for *_, p in window))
        connected = has_directed_spanning_tree(union_graph([gs[p] for p in graphs]))
        if not connected:
            if k == len(windows) - 1 and k > 0:
                notes.append(f"trailing window {k} is truncated by the horizon and skipped")
                continue
            report = condition_rows(terms or [], 0.5 if gamma is None else gamma)
            report.satisfied = False
            report.diagnosis = f"window {k} is not jointly connected"
            return report
        pieces = refine_to_direct_sum([data(p).range_space for p in graphs])
        covered = span_of(pieces)
        rest = complement_in(Subspace.full(m), covered)
        # decomposition of the whole error space containing every S_i
        blocks = pieces + ([rest] if not rest.is_trivial else [])
        window_kappa = projection_constants(
            np.hstack([b.basis for b in blocks]), [b.dim for b in blocks], ratio
        )
        kappa_max = max(kappa_max, window_kappa.kappa)

        inside: dict[int, float] = {}
        for p in graphs:
            R = data(p).range_space
            own = [s for s in pieces if R.contains(s)]
            extra = complement_in(R, span_of(own)) if own else R
            parts = own + ([extra] if not extra.is_trivial else [])
            T = R.basis.T @ np.hstack([s.basis for s in parts])
            inside[p] = projection_constants(T, [s.dim for s in parts], ratio).kappa

        for i, S in enumerate(pieces):
            for start, end, p in window:
                d = data(p)
                if d.range_space.contains(S):
                    hbar = inside[p] * ratio * d.h1.upsilon
                    lam = d.h1.xi
                    in_range = True
                else:
                    hbar = window_kappa.phi(d.kappa_split * d.h2.upsilon)
                    lam = d.h2.xi
                    in_range = False
                terms.append(ConditionTerm(k, i, p, float(hbar), float(lam), end - start, in_range))

    ceiling = 1.0 / (N * kappa_max)
    if gamma is None:
        gamma = 0.9 * ceiling
    elif gamma >= ceiling:
        warnings.warn(
            f"gamma={gamma:.4g} is not below the admissible ceiling {ceiling:.4g}",
            stacklevel=2,
        )
    report = condition_rows(terms, gamma)
    report.gamma_ceiling = ceiling
    report.diagnosis = "; ".join(notes)
    return report


def dwell_time_lower_bound(hbar_terms: Sequence[float], lambda_neg: float, gamma: float) -> float:
    """Shortest dwell making ``sum ln(hbar) + lambda_neg * T < ln gamma`` hold."""
    if lambda_neg >= 0:
        raise ValueError("decay rate must be negative")
    if not 0.0 < gamma < 1.0:
        raise ValueError("gamma must lie in (0, 1)")
    if any(h <= 0 for h in hbar_terms):
        raise ValueError("hbar terms must be positive")
    return (sum(math.log(h) for h in hbar_terms) - math.log(gamma)) / (-lambda_neg)


# -- Lyapunov / observability ----------------------------------------------

@dataclass(frozen=True)
class Assumption5Result:
    holds: bool
    lyapunov_max_eig: float
    observability_rank: int
    n: int

    def __bool__(self):
        return self.holds


def check_assumption5(A, B, P, tol: float = 1e-9) -> Assumption5Result:
    """``A^T P + P A <= 0`` and ``(B^T P, A)`` observable, for a given ``P``."""
    A = np.atleast_2d(np.asarray(A, float))
    B = np.atleast_2d(np.asarray(B, float))
    P = np.atleast_2d(np.asarray(P, float))
    n = A.shape[0]
    if P.shape != (n, n) or not np.allclose(P, P.T, atol=1e-12):
        raise ValueError("P must be a symmetric n x n matrix")
    if np.linalg.eigvalsh(P)[0] <= 0:
        raise ValueError("P must be positive definite")
    top = float(np.linalg.eigvalsh(A.T @ P + P @ A)[-1])
    r = observability_rank(B.T @ P, A)
    scale = max(1.0, float(np.linalg.norm(P, 2) * np.linalg.norm(A, 2)))
    return Assumption5Result(top <= tol * scale and r == n, top, r, n)


# -- nonlinear coupling constants ------------------------------------------

def alpha_for_constrained_subspace(L, Xi, Gamma, constraint: Subspace) -> float:
    """Largest ``alpha`` with ``d^T[(Xi L + L^T Xi)⊗I]d >= alpha d^T[Xi⊗Gamma]d``.

    ``d`` ranges over ``constraint``. Returns ``math.inf`` when the constraint
    is trivial.
    """
    L = np.atleast_2d(np.asarray(L, float))
    Xi = np.atleast_2d(np.asarray(Xi, float))
    Gamma = np.atleast_2d(np.asarray(Gamma, float))
    n = Gamma.shape[0]
    if constraint.is_trivial:
        return math.inf
    if constraint.ambient_dim != L.shape[0] * n:
        raise ValueError("constraint lives in the wrong ambient dimension")
    U = constraint.basis
    S = np.kron(Xi @ L + L.T @ Xi, np.eye(n))
    W = np.kron(Xi, Gamma)
    a = U.T @ S @ U
    b = U.T @ W @ U
    return float(sla.eigh((a + a.T) / 2, (b + b.T) / 2, eigvals_only=True)[0])


def growth_constants(Ls: Sequence, Xis: Sequence, Gamma) -> tuple[float, float]:
    """``c = max lmax(Xi)/lmin(Xi)`` and ``c' = max lmax((Xi L + L^T Xi)⊗Gamma)/lmin(Xi)``."""
    Gamma = np.atleast_2d(np.asarray(Gamma, float))
    c = 0.0
    c_prime = -math.inf
    for L, Xi in zip(Ls, Xis):
        L = np.asarray(L, float)
        d = np.diag(np.asarray(Xi, float))
        lo, hi = float(d.min()), float(d.max())
        c = max(c, hi / lo)
        sym = np.kron(np.diag(d) @ L + L.T @ np.diag(d), Gamma)
        c_prime = max(c_prime, float(np.linalg.eigvalsh((sym + sym.T) / 2)[-1]) / lo)
    return c, c_prime


@dataclass(frozen=True)
class SamplingResult:
    """Outcome of a Monte Carlo falsification test."""

    holds: bool
    worst_ratio: float
    witness: tuple | None
    samples: int

    def __bool__(self):
        return self.holds


def _box(domain_box, dim: int):
    lo, hi = domain_box
    lo = np.broadcast_to(np.asarray(lo, float), (dim,))
    hi = np.broadcast_to(np.asarray(hi, float), (dim,))
    return lo, hi


def lipschitz_projection_check(f: Callable, M, sample_count: int, domain_box, rho_bar: float,
                               n: int, seed: int | None = None) -> SamplingResult:
    """Sample ``||M F(x)|| <= rho_bar ||M x||`` where ``F`` stacks ``f`` per agent.

    Parameters
    ----------
    f : callable
        Agent map ``R^n -> R^n``.
    M : (nN, nN) array
        Idempotent projector.
    domain_box : (low, high)
        Scalars or length-``nN`` bounds.
    """
    M = np.asarray(M, float)
    if np.linalg.norm(M @ M - M) > 1e-9 * max(1.0, np.linalg.norm(M)):
        raise ValueError("M is not a projector")
    if rho_bar <= 0:
        raise ValueError("rho_bar must be positive")
    dim = M.shape[0]
    lo, hi = _box(domain_box, dim)
    rng = np.random.default_rng(resolve_seed(seed))
    worst = 0.0
    for _ in range(sample_count):
        x = rng.uniform(lo, hi)
        Fx = np.concatenate([np.asarray(f(xi), float) for xi in x.reshape(-1, n)])
        den = np.linalg.norm(M @ x)
        if den <= 1e-12:
            continue
        r = np.linalg.norm(M @ Fx) / den
        worst = max(worst, r)
        if r > rho_bar * (1 + 1e-12):
            return SamplingResult(False, r, (x,), sample_count)
    return SamplingResult(True, worst, None, sample_count)


@dataclass(frozen=True)
class PhiThreshold:
    """Coupling strength above which the nonlinear window inequality holds."""

    phi_star: float
    alpha: float
    c: float
    c_prime: float
    rho: float
    rho_bar: float
    gamma_min: float
    t_min: float
    t_max: float
    hbar: float
    gamma: float

    def lhs(self, phi: float) -> float:
        """Left side of the window inequality at coupling ``phi``."""
        growth = max(self.rho * self.c + self.c_prime, self.rho_bar)
        return ((self.t_max / self.t_min) * math.log(self.hbar)
                - 0.5 * phi * self.alpha * self.gamma_min * self.t_min
                + growth * self.t_max)


def phi_threshold(alpha: float, c: float, c_prime: float, rho: float, rho_bar: float,
                  gamma_min: float, T_min: float, T_max: float, hbar: float,
                  gamma: float) -> PhiThreshold:
    """Closed-form coupling threshold: ``lhs(phi_star) == ln gamma``."""
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    if gamma_min <= 0:
        raise ValueError("gamma_min must be positive")
    if not 0.0 < gamma < 1.0:
        raise ValueError("gamma must lie in (0, 1)")
    if hbar <= 0 or T_min <= 0 or T_max < T_min:
        raise ValueError("need hbar > 0 and 0 < T_min <= T_max")
    growth = max(rho * c + c_prime, rho_bar)
    num = (T_max / T_min) * math.log(hbar) + growth * T_max - math.log(gamma)
    phi_star = 2.0 * num / (alpha * gamma_min * T_min)
    return PhiThreshold(phi_star, alpha, c, c_prime, rho, rho_bar, gamma_min,
                        T_min, T_max, hbar, gamma)


# -- QUAD-inverse ----------------------------------------------------------

@dataclass(frozen=True)
class QuadInverseResult:
    holds: bool
    witness: tuple | None
    worst_value: float
    jacobian_sufficient: bool | None

    def __bool__(self):
        return self.holds


def _fd_jacobian(f, x, h=None):
    x = np.asarray(x, float)
    h = 1e-6 * (1 + np.linalg.norm(x)) if h is None else h
    cols = []
    for k in range(x.size):
        d = np.zeros_like(x)
        d[k] = h
        cols.append((np.asarray(f(x + d), float) - np.asarray(f(x - d), float)) / (2 * h))
    return np.column_stack(cols)


def quad_inverse_check(f: Callable, Q, Sigma, sample_count: int, domain_box,
                       seed: int | None = None, jacobian: Callable | None = None) -> QuadInverseResult:
    """Sample ``(x-y)^T Q (f(x) - f(y) - Sigma (x-y)) >= 0``.

    Also reports whether the sufficient Jacobian test
    ``sym(Q J(x)) - Q Sigma >= 0`` held at every sampled ``x``.
    """
    Q = np.atleast_2d(np.asarray(Q, float))
    Sigma = np.atleast_2d(np.asarray(Sigma, float))
    for name, D in (("Q", Q), ("Sigma", Sigma)):
        if np.any(D != np.diag(np.diag(D))) or np.any(np.diag(D) <= 0):
            raise ValueError(f"{name} must be diagonal positive definite")
    n = Q.shape[0]
    lo, hi = _box(domain_box, n)
    rng = np.random.default_rng(resolve_seed(seed))
    jac = jacobian or (lambda x: _fd_jacobian(f, x))
    worst = math.inf
    witness = None
    jac_ok = True
    for _ in range(sample_count):
        x = rng.uniform(lo, hi)
        y = rng.uniform(lo, hi)
        d = x - y
        val = float(d @ Q @ (np.asarray(f(x), float) - np.asarray(f(y), float) - Sigma @ d))
        scale = 1e-10 * max(1.0, float(d @ Q @ d))
        if val < worst:
            worst = val
        if val < -scale and witness is None:
            witness = (x, y)
        if jac_ok:
            J = Q @ np.asarray(jac(x), float)
            jac_ok = float(np.linalg.eigvalsh((J + J.T) / 2 - Q @ Sigma)[0]) >= -1e-9
        if witness is not None and not jac_ok:
            break
    return QuadInverseResult(witness is None, witness, worst, jac_ok)


def quad_inverse_desync_threshold(Ls: Sequence, Sigma, Gamma, Xi=None) -> float:
    """Coupling below which the error grows for a QUAD-inverse network.

    With ``alpha = max_p lmax(Xi^{-1/2}(Xi L̃_p + L̃_p^T Xi)Xi^{-1/2})`` over the
    reduced Laplacians, returns ``min_i 2 Sigma_ii / (alpha Gamma_ii)``; the
    weighted error norm then strictly increases for ``phi`` below it.
    Returns ``inf`` when ``alpha <= 0``.
    """
    sig = np.diag(np.atleast_2d(np.asarray(Sigma, float)))
    gam = np.diag(np.atleast_2d(np.asarray(Gamma, float)))
    alpha = -math.inf
    for L in Ls:
        Lr = reduced_laplacian(L)
        Xd = np.ones(Lr.shape[0]) if Xi is None else np.diag(np.asarray(Xi, float))
        S = np.diag(Xd) @ Lr + Lr.T @ np.diag(Xd)
        w = 1.0 / np.sqrt(Xd)
        alpha = max(alpha, float(np.linalg.eigvalsh(w[:, None] * S * w[None, :])[-1]))
    if alpha <= 0:
        return math.inf
    return float(np.min(2.0 * sig / (alpha * gam)))
