"""Dense linear algebra: subspaces, Laplacian kernels and invariant splittings."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
import scipy.linalg as sla

from .graphs import ReachDecomposition, WeightedDigraph, reach_decomposition

__all__ = [
    "Subspace",
    "KernelBasis",
    "EigenStructure",
    "ProjectionConstants",
    "rank",
    "nullspace",
    "range_space",
    "intersect",
    "span_of",
    "complement_in",
    "kernel_basis_by_reaches",
    "left_null_unit",
    "beta_vectors",
    "delta_projector",
    "reduced_laplacian",
    "difference_operator",
    "eigenstructure",
    "refine_to_direct_sum",
    "projection_constants",
    "project",
    "observability_rank",
    "zero_tolerance",
]

RANK_RTOL = 1e-10
CONTAIN_TOL = 1e-9


def _as_matrix(m) -> np.ndarray:
    m = np.atleast_2d(np.asarray(m, dtype=float))
    if not np.all(np.isfinite(m)):
        raise ValueError("matrix has non-finite entries")
    return m


def _sigma_max(m: np.ndarray) -> float:
    if m.size == 0:
        return 0.0
    return float(np.linalg.norm(m, 2))


def zero_tolerance(m) -> float:
    """Eigenvalues with modulus below this count as zero."""
    return 1e-8 * max(1.0, _sigma_max(_as_matrix(m)))


class Subspace:
    """Linear subspace of ``R^m`` stored by an orthonormal basis.

    Parameters
    ----------
    basis : array_like, shape (m, d)
        Columns spanning the subspace. They are orthonormalized unless
        ``orthonormal=True`` promises they already are.
    ambient_dim : int, optional
        Needed only when ``basis`` has no columns.
    """

    __slots__ = ("basis",)

    def __init__(self, basis, ambient_dim: int | None = None, orthonormal: bool = False):
        B = np.asarray(basis, dtype=float)
        if B.ndim == 1:
            B = B.reshape(-1, 1)
        if B.size == 0:
            m = ambient_dim if ambient_dim is not None else B.shape[0]
            B = np.zeros((m, 0))
        elif not orthonormal:
            B = _orth(B)
        if ambient_dim is not None and B.shape[0] != ambient_dim:
            raise ValueError("basis rows do not match ambient_dim")
        B.flags.writeable = False
        self.basis = B

    @classmethod
    def trivial(cls, m: int) -> "Subspace":
        return cls(np.zeros((m, 0)), ambient_dim=m, orthonormal=True)

    @classmethod
    def full(cls, m: int) -> "Subspace":
        return cls(np.eye(m), orthonormal=True)

    @classmethod
    def span(cls, *vectors) -> "Subspace":
        return cls(np.column_stack([np.asarray(v, dtype=float) for v in vectors]))

    @property
    def ambient_dim(self) -> int:
        return self.basis.shape[0]

    @property
    def dim(self) -> int:
        return self.basis.shape[1]

    @property
    def is_trivial(self) -> bool:
        return self.dim == 0

    @property
    def projector(self) -> np.ndarray:
        return self.basis @ self.basis.T

    def contains(self, other, tol: float = CONTAIN_TOL) -> bool:
        """True if ``other`` (a Subspace or vector) lies in this subspace."""
        X = other.basis if isinstance(other, Subspace) else np.asarray(other, float).reshape(self.ambient_dim, -1)
        if X.size == 0:
            return True
        resid = X - self.basis @ (self.basis.T @ X)
        scale = max(1.0, float(np.linalg.norm(X, 2)))
        return float(np.linalg.norm(resid, 2)) < tol * scale

    def equals(self, other: "Subspace", tol: float = CONTAIN_TOL) -> bool:
        return self.dim == other.dim and self.contains(other, tol) and other.contains(self, tol)

    def __repr__(self):
        return f"Subspace(dim={self.dim}, ambient_dim={self.ambient_dim})"


def _orth(B: np.ndarray, rtol: float = RANK_RTOL, atol: float = 0.0) -> np.ndarray:
    if B.size == 0:
        return np.zeros((B.shape[0], 0))
    U, s, _ = np.linalg.svd(B, full_matrices=False)
    if s.size == 0 or s[0] <= atol:
        return np.zeros((B.shape[0], 0))
    r = int(np.sum(s > max(rtol * s[0], atol)))
    return U[:, :r]


def rank(m, tol: float = RANK_RTOL) -> int:
    """Numerical rank: singular values above ``tol * sigma_max``."""
    if tol <= 0:
        raise ValueError("tol must be positive")
    m = np.asarray(m, dtype=float)
    if m.size == 0:
        return 0
    s = np.linalg.svd(np.atleast_2d(m), compute_uv=False)
    if s[0] == 0.0:
        return 0
    return int(np.sum(s > tol * s[0]))


def nullspace(m, tol: float = RANK_RTOL) -> Subspace:
    """Orthonormal basis of the right null space of ``m``."""
    m = _as_matrix(m)
    n = m.shape[1]
    r = rank(m, tol)
    if r == 0:
        return Subspace.full(n)
    _, _, Vt = np.linalg.svd(m)
    return Subspace(Vt[r:].T.copy(), ambient_dim=n, orthonormal=True)


def range_space(m, tol: float = RANK_RTOL) -> Subspace:
    """Column space of ``m``."""
    m = _as_matrix(m)
    return Subspace(_orth(m, tol), ambient_dim=m.shape[0], orthonormal=True)


def span_of(spaces: Sequence[Subspace]) -> Subspace:
    """Smallest subspace containing every space in ``spaces``."""
    m = spaces[0].ambient_dim
    return Subspace(np.hstack([s.basis for s in spaces]), ambient_dim=m)


def intersect(a: Subspace, b: Subspace) -> Subspace:
    """``a ∩ b`` as the common null space of the two complement projectors."""
    m = a.ambient_dim
    if a.is_trivial or b.is_trivial:
        return Subspace.trivial(m)
    I = np.eye(m)
    stacked = np.vstack([I - a.projector, I - b.projector])
    _, s, Vt = np.linalg.svd(stacked)
    # singular values of the stacked projectors lie in [0, sqrt(2)]
    null = Vt[s < 1e-7].T
    if null.size == 0:
        return Subspace.trivial(m)
    return Subspace(null, ambient_dim=m)


def complement_in(parent: Subspace, child: Subspace) -> Subspace:
    """Orthogonal complement of ``child`` inside ``parent``."""
    m = parent.ambient_dim
    if child.is_trivial:
        return parent
    C = parent.basis - child.basis @ (child.basis.T @ parent.basis)
    # parent basis is orthonormal, so an absolute cutoff is meaningful here
    return Subspace(_orth(C, 1e-7, atol=1e-7), ambient_dim=m, orthonormal=True)


def project(x, S: Subspace) -> np.ndarray:
    """Orthogonal projection of ``x`` onto ``S``."""
    x = np.asarray(x, dtype=float)
    if x.shape[0] != S.ambient_dim:
        raise ValueError(f"vector of length {x.shape[0]} does not live in R^{S.ambient_dim}")
    return S.basis @ (S.basis.T @ x)


# -- Laplacian kernels -----------------------------------------------------

@dataclass(frozen=True)
class KernelBasis:
    """One nonnegative kernel vector per reach, summing to the ones vector."""

    vectors: tuple
    reach_ids: tuple

    def as_matrix(self) -> np.ndarray:
        """Columns are the kernel vectors."""
        return np.column_stack(self.vectors)


def _decomposition_for(L: np.ndarray, rd: ReachDecomposition | None) -> ReachDecomposition:
    if rd is None:
        rd = reach_decomposition(WeightedDigraph.from_laplacian(L))
    if rd.n_nodes != L.shape[0]:
        raise ValueError("reach decomposition does not match the Laplacian size")
    return rd


def kernel_basis_by_reaches(L, rd: ReachDecomposition | None = None) -> KernelBasis:
    """Kernel vectors of a Laplacian indexed by its reaches.

    Vector ``i`` is 1 on the exclusive part of reach ``i``, 0 outside the reach,
    and on the common part it solves the Laplacian rows restricted to those
    nodes.
    """
    L = _as_matrix(L)
    rd = _decomposition_for(L, rd)
    vectors = []
    for i, (R, H, C) in enumerate(zip(rd.reaches, rd.exclusive, rd.common)):
        v = np.zeros(L.shape[0])
        h = sorted(H)
        v[h] = 1.0
        if C:
            c = sorted(C)
            A = L[np.ix_(c, c)]
            rhs = -L[np.ix_(c, h)].sum(axis=1) if h else np.zeros(len(c))
            if rank(A) < len(c):
                raise np.linalg.LinAlgError(
                    f"restricted Laplacian on the common part of reach {i} is singular"
                )
            v[c] = np.linalg.solve(A, rhs)
        vectors.append(v)
    return KernelBasis(vectors=tuple(vectors), reach_ids=tuple(range(rd.chi)))


def left_null_unit(block) -> np.ndarray:
    """Positive left null vector of an irreducible Laplacian block, summing to 1."""
    Lb = _as_matrix(block)
    k = Lb.shape[0]
    if k == 1:
        if abs(Lb[0, 0]) > 1e-12:
            raise ValueError("1x1 block of a closed component must be zero")
        return np.array([1.0])
    # v^T Lb = 0 and v^T 1 = 1, solved in the least-squares sense
    M = np.vstack([Lb.T, np.ones((1, k))])
    rhs = np.zeros(k + 1)
    rhs[-1] = 1.0
    v, *_ = np.linalg.lstsq(M, rhs, rcond=None)
    if np.linalg.norm(M @ v - rhs) > 1e-9 * max(1.0, _sigma_max(Lb)):
        raise ValueError("block has no left null vector with unit sum")
    if np.any(v <= 0):
        raise ValueError("block is not irreducible: left null vector is not positive")
    return v


def beta_vectors(L, rd: ReachDecomposition | None = None) -> list[np.ndarray]:
    """Left kernel vectors of ``L``, one per closed component, each summing to 1."""
    L = _as_matrix(L)
    rd = _decomposition_for(L, rd)
    out = []
    for blk in rd.closed_blocks:
        idx = list(blk)
        b = np.zeros(L.shape[0])
        b[idx] = left_null_unit(L[np.ix_(idx, idx)])
        out.append(b)
    return out


def delta_projector(L, n: int = 1, rd: ReachDecomposition | None = None) -> np.ndarray:
    """``(I - sum_j gamma_j beta_j^T) ⊗ I_n`` mapping states to the δ-error."""
    L = _as_matrix(L)
    rd = _decomposition_for(L, rd)
    gammas = kernel_basis_by_reaches(L, rd).vectors
    betas = beta_vectors(L, rd)
    N = L.shape[0]
    M = np.eye(N) - sum(np.outer(g, b) for g, b in zip(gammas, betas))
    return np.kron(M, np.eye(n))


def difference_operator(N: int) -> np.ndarray:
    """``[1_{N-1}, -I_{N-1}]``: rows give ``x_1 - x_j`` for ``j = 2..N``."""
    return np.hstack([np.ones((N - 1, 1)), -np.eye(N - 1)])


def reduced_laplacian(L) -> np.ndarray:
    """Lower-right ``(N-1)`` block of ``Δ L Δ`` with ``Δ`` its own inverse."""
    L = _as_matrix(L)
    N = L.shape[0]
    if N < 2:
        raise ValueError("reduced Laplacian needs at least two nodes")
    D = np.zeros((N, N))
    D[0, 0] = 1.0
    D[1:, :] = difference_operator(N)
    T = D @ L @ D
    if np.linalg.norm(T[1:, 0]) > 1e-9 * max(1.0, _sigma_max(L)):
        raise ArithmeticError("lower-left block of the transformed Laplacian is not zero")
    return T[1:, 1:].copy()


# -- eigenstructure --------------------------------------------------------

@dataclass(frozen=True)
class EigenStructure:
    eigenvalues: np.ndarray
    zero_alg_mult: int
    zero_geo_mult: int
    zero_generalized_space: Subspace
    nonzero_invariant_space: Subspace

    @property
    def semisimple_zero(self) -> bool:
        return self.zero_alg_mult == self.zero_geo_mult


def eigenstructure(m, tol: float | None = None) -> EigenStructure:
    """Zero/nonzero spectral splitting via ordered real Schur forms.

    ``tol`` defaults to :func:`zero_tolerance`. The generalized zero space is
    the span of the leading Schur vectors once the near-zero eigenvalues are
    sorted first; the complementary invariant space uses the reverse ordering.
    """
    m = _as_matrix(m)
    k = m.shape[0]
    if m.shape[1] != k:
        raise ValueError("eigenstructure needs a square matrix")
    tol = zero_tolerance(m) if tol is None else tol
    eig = np.linalg.eigvals(m)
    alg = int(np.sum(np.abs(eig) < tol))
    smax = _sigma_max(m)
    geo = k if smax == 0.0 else k - rank(m, tol / smax)

    try:
        _, Z0, s0 = sla.schur(m, output="real", sort=lambda re, im: np.hypot(re, im) < tol)
        _, Z1, s1 = sla.schur(m, output="real", sort=lambda re, im: np.hypot(re, im) >= tol)
    except (sla.LinAlgError, ValueError) as exc:
        raise np.linalg.LinAlgError(f"Schur decomposition failed: {exc}") from exc
    zero_space = Subspace(Z0[:, :s0].copy(), ambient_dim=k, orthonormal=True)
    nonzero_space = Subspace(Z1[:, :s1].copy(), ambient_dim=k, orthonormal=True)
    return EigenStructure(
        eigenvalues=eig,
        zero_alg_mult=alg,
        zero_geo_mult=geo,
        zero_generalized_space=zero_space,
        nonzero_invariant_space=nonzero_space,
    )


# -- refinement ------------------------------------------------------------

def refine_to_direct_sum(spaces: Sequence[Subspace]) -> list[Subspace]:
    """Split a family of subspaces into pieces whose sum is direct.

    Spaces are consumed in order. Each existing piece ``P`` is split into
    ``P ⊖ (S ∩ P)`` and ``S ∩ P``, and the part of ``S`` not yet covered
    (its orthogonal complement of ``S ∩ span(pieces)``) is appended. Every
    piece lies in at least one input space and the pieces sum to the span of
    all inputs.
    """
    spaces = list(spaces)
    if not spaces:
        return []
    m = spaces[0].ambient_dim
    if any(s.ambient_dim != m for s in spaces):
        raise ValueError("subspaces live in different ambient dimensions")
    pieces: list[Subspace] = []
    for S in spaces:
        if S.is_trivial:
            continue
        covered = span_of(pieces) if pieces else Subspace.trivial(m)
        split: list[Subspace] = []
        for P in pieces:
            common = intersect(S, P)
            if common.is_trivial or common.dim == P.dim:
                split.append(P)
                continue
            split.append(complement_in(P, common))
            split.append(common)
        new = complement_in(S, intersect(S, covered))
        pieces = [p for p in split if not p.is_trivial]
        if not new.is_trivial:
            pieces.append(new)
    return pieces


# -- projection constants --------------------------------------------------

@dataclass(frozen=True)
class ProjectionConstants:
    """Multipliers turning a bound in transformed coordinates into one on ``x``.

    ``kappa = max_i sigma_max(M_i T^-1) / sigma_min(T^-1)``; ``theta(psi)`` and
    ``phi(psi)`` scale ``psi`` by ``kappa`` (and by ``ratio`` for ``phi``).
    """

    kappa: float
    ratio: float = 1.0

    def theta(self, psi: float) -> float:
        return self.kappa * psi

    def phi(self, psi: float) -> float:
        return self.kappa * psi * self.ratio


def projection_constants(T, block_dims: Sequence[int], ratio: float = 1.0) -> ProjectionConstants:
    """Constants for the coordinate change ``x = T z`` split into blocks.

    Parameters
    ----------
    T : (m, m) array
        Invertible; its column groups span the blocks.
    block_dims : sequence of int
        Sizes of the consecutive column groups, summing to ``m``.
    ratio : float
        Caller-supplied initial-condition ratio used by ``phi``.
    """
    T = _as_matrix(T)
    m = T.shape[0]
    if sum(block_dims) != m:
        raise ValueError("block dimensions must add up to the size of T")
    s = np.linalg.svd(T, compute_uv=False)
    if s[-1] <= 1e-12 * s[0]:
        raise np.linalg.LinAlgError("T is singular")
    Tinv = np.linalg.inv(T)
    smin_inv = 1.0 / s[0]
    worst = 0.0
    start = 0
    for d in block_dims:
        if d:
            worst = max(worst, _sigma_max(Tinv[start:start + d, :]))
        start += d
    return ProjectionConstants(kappa=worst / smin_inv, ratio=float(ratio))


def observability_rank(C, A) -> int:
    """Rank of ``[C; CA; ...; CA^{n-1}]``."""
    C = _as_matrix(C)
    A = _as_matrix(A)
    n = A.shape[0]
    if A.shape[1] != n or C.shape[1] != n:
        raise ValueError("incompatible dimensions for (C, A)")
    blocks = [C]
    for _ in range(n - 1):
        blocks.append(blocks[-1] @ A)
    O = np.vstack(blocks)
    if not np.any(O):
        return 0
    return rank(O, 1e-9)
