"""Closed-form ridge training and exact subnetwork merging.

The output weight of a random-feature network is the ridge minimizer of
``||HW - Y||^2 + ||W||^2 / alpha`` (larger alpha means a milder ridge), so
the normal equations read ``(H'H + I/alpha) W = H'Y``.  Everything here is
built from symmetric positive definite factorizations of that system and of
its 2x2 block structure:

* :func:`solve_primal` / :func:`solve_dual` / :func:`solve_auto` - direct
  training in the sample-rich and neuron-rich regimes.
* :func:`build_merge_operands` + :func:`merge_primal` - combine the weights
  of two trained subnetworks into the exact whole-network weight using the
  Schur complement of the blocked gram matrix (sample-rich regime).
* :func:`merge_dual` - the same combination in the neuron-rich regime via
  the Woodbury identity, as a correction subtracted from the stacked weights.
* :func:`hierarchical_train` - recursive divide/train/merge over a partition
  tree, with concurrent leaf training.
* :func:`incremental_init` / :func:`incremental_add` - grow a trained
  network by blocks of new hidden units without retraining from scratch.

The merge is exact: up to floating-point rounding, every path yields the
same matrix as direct training on the concatenated network.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve, solve_triangular

from .model import (
    Activation,
    RandomFeatureMap,
    compute_hidden_matrix,
    concat_feature_maps,
    split_feature_map,
)

#: Ridge trade-off used when a caller does not specify one.  The penalty on
#: ||W||^2 is 1/alpha, so larger alpha means a milder ridge.
DEFAULT_ALPHA = 1e3


class FactorizationError(ArithmeticError):
    """A matrix expected to be symmetric positive definite was not."""


@dataclass(frozen=True)
class RidgeConfig:
    """Regularization setting shared by all solvers."""

    alpha: float = DEFAULT_ALPHA

    def __post_init__(self):
        if not (np.isfinite(self.alpha) and self.alpha > 0):
            raise ValueError(f"alpha must be finite and > 0, got {self.alpha}")


def _chol_spd(M: np.ndarray, name: str):
    """Cholesky-factor a symmetric positive definite matrix.

    Returns a clean lower-triangular factor L with M = L L'.  Raises
    :class:`FactorizationError` naming the offending matrix if M is
    materially non-symmetric or not positive definite.
    """
    scale = max(1.0, float(np.max(np.abs(M))) if M.size else 1.0)
    if M.shape[0] != M.shape[1] or np.max(np.abs(M - M.T)) > 1e-10 * scale:
        raise FactorizationError(f"matrix {name} is not symmetric")
    try:
        c, _ = cho_factor(M, lower=True, check_finite=False)
    except LinAlgError as exc:
        raise FactorizationError(f"matrix {name} is not positive definite: {exc}") from exc
    return np.tril(c)


def _cho_solve(L: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    return cho_solve((L, True), rhs, check_finite=False)


def _check_training_pair(H: np.ndarray, Y: np.ndarray) -> None:
    if H.ndim != 2 or Y.ndim != 2:
        raise ValueError(f"H and Y must be 2-D, got shapes {H.shape} and {Y.shape}")
    if H.shape[0] != Y.shape[0]:
        raise ValueError(
            f"H has {H.shape[0]} samples but Y has {Y.shape[0]}"
        )


def _ridge_gram(M: np.ndarray, alpha: float) -> np.ndarray:
    """M'M + I/alpha for a tall-or-wide factor M, as a fresh array."""
    G = M.T @ M
    G[np.diag_indices_from(G)] += 1.0 / alpha
    return G


def _solve_primal_cached(H, Y, cfg):
    """Primal solve that also returns the ridge gram and its factor."""
    gram = _ridge_gram(H, cfg.alpha)
    L = _chol_spd(gram, "H'H + I/alpha")
    W = _cho_solve(L, H.T @ Y)
    return W, gram, L


def solve_primal(H: np.ndarray, Y: np.ndarray, cfg: RidgeConfig = RidgeConfig()) -> np.ndarray:
    """W = (H'H + I/alpha)^-1 H'Y via Cholesky of the m x m system."""
    _check_training_pair(H, Y)
    W, _, _ = _solve_primal_cached(H, Y, cfg)
    return W


def solve_dual(H: np.ndarray, Y: np.ndarray, cfg: RidgeConfig = RidgeConfig()) -> np.ndarray:
    """W = H'(HH' + I/alpha)^-1 Y via Cholesky of the n x n system."""
    _check_training_pair(H, Y)
    K = H @ H.T
    K[np.diag_indices_from(K)] += 1.0 / cfg.alpha
    L = _chol_spd(K, "HH' + I/alpha")
    return H.T @ _cho_solve(L, Y)


def solve_auto(H: np.ndarray, Y: np.ndarray, cfg: RidgeConfig = RidgeConfig()) -> np.ndarray:
    """Dispatch on the cheaper system: primal when n >= m, else dual."""
    _check_training_pair(H, Y)
    n, m = H.shape
    if n >= m:
        return solve_primal(H, Y, cfg)
    return solve_dual(H, Y, cfg)


# ---------------------------------------------------------------------------
# merging two trained subnetworks, sample-rich regime
# ---------------------------------------------------------------------------

@dataclass
class MergeOperands:
    """Blocks and factors of the blocked ridge gram [[A, B], [B', C]].

    A and C are the subnetworks' ridge grams (I/alpha + Hi'Hi), B is the
    cross-gram H1'H2, and S_C = A - B C^-1 B' is the Schur complement used
    by the merge.  ``chol_A`` may be absent when the caller never needs
    A-side solves.
    """

    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    S_C: np.ndarray
    chol_C: np.ndarray
    chol_SC: np.ndarray
    chol_A: np.ndarray | None = None

    @property
    def m1(self) -> int:
        return self.A.shape[0]

    @property
    def m2(self) -> int:
        return self.C.shape[0]


def _assemble_operands(A, B, C, chol_C, chol_A=None) -> MergeOperands:
    """Factor the Schur complement S_C = A - B C^-1 B' from ready blocks."""
    G = solve_triangular(chol_C, B.T, lower=True, check_finite=False)
    S_C = A - G.T @ G
    chol_SC = _chol_spd(S_C, "S_C")
    return MergeOperands(A=A, B=B, C=C, S_C=S_C, chol_C=chol_C, chol_SC=chol_SC, chol_A=chol_A)


def build_merge_operands(
    H1: np.ndarray, H2: np.ndarray, cfg: RidgeConfig = RidgeConfig()
) -> MergeOperands:
    """Assemble and factor A, B, C, S_C for two hidden-matrix blocks."""
    if H1.ndim != 2 or H2.ndim != 2 or H1.shape[0] != H2.shape[0]:
        raise ValueError(
            f"hidden blocks must share the sample axis, got {H1.shape} and {H2.shape}"
        )
    A = _ridge_gram(H1, cfg.alpha)
    C = _ridge_gram(H2, cfg.alpha)
    B = H1.T @ H2
    chol_A = _chol_spd(A, "A")
    chol_C = _chol_spd(C, "C")
    return _assemble_operands(A, B, C, chol_C, chol_A=chol_A)


def _merge_primal_core(ops: MergeOperands, W1: np.ndarray, W2: np.ndarray) -> np.ndarray:
    # top    = S_C^-1 (A W1 - B W2)            (= E W1 - S_C^-1 B W2)
    # bottom = W2 - C^-1 B' top                (= -C^-1 B' E W1 + D W2)
    top = _cho_solve(ops.chol_SC, ops.A @ W1 - ops.B @ W2)
    bottom = W2 - _cho_solve(ops.chol_C, ops.B.T @ top)
    return np.vstack([top, bottom])


def merge_primal(ops: MergeOperands, W1: np.ndarray, W2: np.ndarray) -> np.ndarray:
    """Exact whole-network weight from two subnetwork weights (n >= m1+m2).

    W1 and W2 must be the ridge solutions of the two blocks on the same
    targets and alpha used to build ``ops``.
    """
    if W1.ndim != 2 or W2.ndim != 2 or W1.shape[1] != W2.shape[1]:
        raise ValueError(f"weight blocks disagree: {W1.shape} vs {W2.shape}")
    if W1.shape[0] != ops.m1 or W2.shape[0] != ops.m2:
        raise ValueError(
            f"weights ({W1.shape[0]}, {W2.shape[0]}) do not match operand blocks "
            f"({ops.m1}, {ops.m2})"
        )
    return _merge_primal_core(ops, W1, W2)


@dataclass(frozen=True)
class MergeMatrices:
    """Explicit merge transform, in two algebraically equal layouts.

    ``z`` is [[S_C^-1 A, -S_C^-1 B], [-S_A^-1 B', S_A^-1 C]]; ``z_factored``
    is the same transform assembled as blockdiag(S_C^-1, S_A^-1) times
    [[A, -B], [-B', C]].  Applying either to the stacked subnetwork weights
    reproduces the merged weight.
    """

    z: np.ndarray
    z_factored: np.ndarray


def build_Z_symmetric(ops: MergeOperands) -> MergeMatrices:
    """Materialize the merge transform; needs the S_A-side factor too."""
    if ops.chol_A is None:
        raise ValueError("operands were built without an A-side factorization")
    K = solve_triangular(ops.chol_A, ops.B, lower=True, check_finite=False)
    S_A = ops.C - K.T @ K
    chol_SA = _chol_spd(S_A, "S_A")

    z = np.block([
        [_cho_solve(ops.chol_SC, ops.A), -_cho_solve(ops.chol_SC, ops.B)],
        [-_cho_solve(chol_SA, ops.B.T), _cho_solve(chol_SA, ops.C)],
    ])
    signed = np.block([[ops.A, -ops.B], [-ops.B.T, ops.C]])
    z_factored = np.vstack([
        _cho_solve(ops.chol_SC, signed[: ops.m1]),
        _cho_solve(chol_SA, signed[ops.m1 :]),
    ])
    return MergeMatrices(z=z, z_factored=z_factored)


# ---------------------------------------------------------------------------
# merging in the neuron-rich regime (n < m1 + m2), Woodbury identity
# ---------------------------------------------------------------------------

def merge_dual(
    H1: np.ndarray,
    H2: np.ndarray,
    W1: np.ndarray,
    W2: np.ndarray,
    Y: np.ndarray,
    cfg: RidgeConfig = RidgeConfig(),
    return_adjustment: bool = False,
):
    """Whole-network weight as stacked subnetwork weights minus a correction.

    Requires n < m1 + m2.  W1 and W2 must be the dual-form solutions
    Hi'(I/alpha + Hi Hi')^-1 Y of the two blocks.  The correction for each
    block is obtained by expanding (I/alpha + H1 H1' + H2 H2')^-1 around that
    block's own gram with the Woodbury identity.
    """
    n, m1 = H1.shape
    m2 = H2.shape[1]
    if H2.shape[0] != n or Y.shape[0] != n:
        raise ValueError(
            f"sample counts disagree: H1 {H1.shape}, H2 {H2.shape}, Y {Y.shape}"
        )
    if W1.shape != (m1, Y.shape[1]) or W2.shape != (m2, Y.shape[1]):
        raise ValueError(
            f"weight shapes {W1.shape}, {W2.shape} do not match blocks and targets"
        )
    if n >= m1 + m2:
        raise ValueError(
            f"dual merge requires n < m1 + m2, got n={n}, m1+m2={m1 + m2}"
        )

    def block_adjustment(H_own, H_other):
        gram = H_own @ H_own.T
        gram[np.diag_indices_from(gram)] += 1.0 / cfg.alpha
        L = _chol_spd(gram, "I/alpha + HH'")
        Gi_other = _cho_solve(L, H_other)
        M = H_other.T @ Gi_other
        M[np.diag_indices_from(M)] += 1.0
        chol_M = _chol_spd(M, "I + H' G^-1 H")
        t = _cho_solve(chol_M, H_other.T @ _cho_solve(L, Y))
        return H_own.T @ (Gi_other @ t)

    delta1 = block_adjustment(H1, H2)
    delta2 = block_adjustment(H2, H1)
    merged = np.vstack([W1 - delta1, W2 - delta2])
    if return_adjustment:
        return merged, np.vstack([delta1, delta2])
    return merged


# ---------------------------------------------------------------------------
# hierarchical training over a partition tree
# ---------------------------------------------------------------------------

@dataclass
class _Node:
    """A trained (sub)network during the bottom-up merge."""

    W: np.ndarray
    lo: int
    hi: int
    gram: np.ndarray | None = None   # I/alpha + H'H for this column range
    chol: np.ndarray | None = None

    @property
    def size(self) -> int:
        return self.hi - self.lo


def flatten_partition(partition) -> list[int]:
    """Leaf sizes of a partition tree, in left-to-right order."""
    if isinstance(partition, (int, np.integer)):
        if partition < 1:
            raise ValueError(f"partition leaves must be positive, got {partition}")
        return [int(partition)]
    if isinstance(partition, (list, tuple)):
        if not partition:
            raise ValueError("partition nodes must have at least one child")
        sizes = []
        for child in partition:
            sizes.extend(flatten_partition(child))
        return sizes
    raise ValueError(f"partition entries must be ints or lists, got {partition!r}")


def hierarchical_train(
    X: np.ndarray,
    Y: np.ndarray,
    fmap: RandomFeatureMap,
    partition,
    cfg: RidgeConfig = RidgeConfig(),
    max_workers: int | None = None,
) -> np.ndarray:
    """Train by splitting the hidden layer, solving leaves, merging upward.

    ``partition`` is a tree of hidden-unit counts: a flat list such as
    ``[2000, 2000]`` trains two subnetworks and merges once, while nested
    lists like ``[[1000, 1000], [1000, 1000]]`` merge level by level.  Leaf
    subnetworks are independent and are trained concurrently.  The result
    equals :func:`solve_auto` on the full network up to rounding, for any
    partition shape.
    """
    sizes = flatten_partition(partition)
    if sum(sizes) != fmap.hidden_count:
        raise ValueError(
            f"partition {partition!r} covers {sum(sizes)} units, "
            f"map has {fmap.hidden_count}"
        )
    leaf_maps = split_feature_map(fmap, sizes)
    offsets = np.concatenate([[0], np.cumsum(sizes)]).astype(int)
    n = X.shape[1]
    # column-major so each node's column range is a contiguous block, and so
    # leaf grams hit the same BLAS path as a directly computed hidden matrix
    H = np.empty((n, fmap.hidden_count), order="F")

    def train_leaf(i: int) -> _Node:
        lo, hi = offsets[i], offsets[i + 1]
        H[:, lo:hi] = compute_hidden_matrix(leaf_maps[i], X)
        block = H[:, lo:hi]
        if n >= sizes[i]:
            W, gram, chol = _solve_primal_cached(block, Y, cfg)
            return _Node(W=W, lo=lo, hi=hi, gram=gram, chol=chol)
        return _Node(W=solve_dual(block, Y, cfg), lo=lo, hi=hi)

    if max_workers is None:
        max_workers = os.cpu_count() or 1
    if max_workers > 1 and len(sizes) > 1:
        with ThreadPoolExecutor(max_workers=max_workers) as pool:
            leaves = list(pool.map(train_leaf, range(len(sizes))))
    else:
        leaves = [train_leaf(i) for i in range(len(sizes))]

    def merge_pair(left: _Node, right: _Node) -> _Node:
        lo, hi = left.lo, right.hi
        if n >= left.size + right.size:
            if right.chol is None:
                right.chol = _chol_spd(right.gram, "C")
            B = H[:, left.lo : left.hi].T @ H[:, right.lo : right.hi]
            ops = _assemble_operands(left.gram, B, right.gram, right.chol)
            W = _merge_primal_core(ops, left.W, right.W)
            gram = np.block([[left.gram, B], [B.T, right.gram]])
            return _Node(W=W, lo=lo, hi=hi, gram=gram)
        W = merge_dual(
            H[:, left.lo : left.hi], H[:, right.lo : right.hi],
            left.W, right.W, Y, cfg,
        )
        return _Node(W=W, lo=lo, hi=hi)

    def train_node(node, cursor: int) -> _Node:
        if isinstance(node, (int, np.integer)):
            leaf = leaves[cursor]
            return leaf
        children = []
        for child in node:
            trained = train_node(child, cursor)
            cursor += len(flatten_partition(child))
            children.append(trained)
        merged = children[0]
        for right in children[1:]:
            merged = merge_pair(merged, right)
        return merged

    if isinstance(partition, (int, np.integer)):
        return leaves[0].W
    return train_node(partition, 0).W


# ---------------------------------------------------------------------------
# incremental growth
# ---------------------------------------------------------------------------

@dataclass
class IncrementalState:
    """A trained network plus the caches needed to grow it cheaply.

    ``gram`` is I/alpha + H'H for the current hidden matrix and ``chol`` its
    lower Cholesky factor, extended block-wise on each growth step.
    """

    fmap: RandomFeatureMap
    hidden: np.ndarray
    weight: np.ndarray
    gram: np.ndarray
    chol: np.ndarray
    alpha: float

    @property
    def hidden_count(self) -> int:
        return self.fmap.hidden_count


def incremental_init(
    X: np.ndarray,
    Y: np.ndarray,
    fmap: RandomFeatureMap,
    cfg: RidgeConfig = RidgeConfig(),
) -> IncrementalState:
    """Train the starting network and cache its hidden matrix and gram."""
    H = compute_hidden_matrix(fmap, X)
    W, gram, chol = _solve_primal_cached(H, Y, cfg)
    return IncrementalState(fmap=fmap, hidden=H, weight=W, gram=gram, chol=chol, alpha=cfg.alpha)


def incremental_add(
    state: IncrementalState,
    new_block: RandomFeatureMap,
    X: np.ndarray,
    Y: np.ndarray,
    cfg: RidgeConfig = RidgeConfig(),
) -> IncrementalState:
    """Append a block of hidden units and update the weight exactly.

    The new block is trained alone, then folded in with the update
    W_grown = P W_old - Q W_block, where P and Q come from the Schur
    complement of the extended gram.  The result matches retraining the
    grown network from scratch; the input state is left untouched.
    """
    if cfg.alpha != state.alpha:
        raise ValueError(
            f"alpha changed between steps: state has {state.alpha}, got {cfg.alpha}"
        )
    if new_block.input_dim != state.fmap.input_dim:
        raise ValueError(
            f"input_dim mismatch: state {state.fmap.input_dim}, block {new_block.input_dim}"
        )
    n = state.hidden.shape[0]
    if X.shape[1] != n or Y.shape[0] != n:
        raise ValueError(
            f"training set changed: state has {n} samples, got X {X.shape}, Y {Y.shape}"
        )

    m_old, m_new = state.hidden_count, new_block.hidden_count
    H_new = compute_hidden_matrix(new_block, X)
    W_block, C, chol_C = _solve_primal_cached(H_new, Y, cfg)
    B = state.hidden.T @ H_new
    ops = _assemble_operands(state.gram, B, C, chol_C)
    W = _merge_primal_core(ops, state.weight, W_block)

    # extend the cached Cholesky factor block-wise:
    # [[L, 0], [K', chol(C - K'K)]] with K = L^-1 B
    K = solve_triangular(state.chol, B, lower=True, check_finite=False)
    S_A = C - K.T @ K
    chol_SA = _chol_spd(S_A, "S_A")
    chol = np.zeros((m_old + m_new, m_old + m_new))
    chol[:m_old, :m_old] = state.chol
    chol[m_old:, :m_old] = K.T
    chol[m_old:, m_old:] = chol_SA

    hidden = np.empty((state.hidden.shape[0], m_old + m_new), order="F")
    hidden[:, :m_old] = state.hidden
    hidden[:, m_old:] = H_new

    return IncrementalState(
        fmap=concat_feature_maps(state.fmap, new_block),
        hidden=hidden,
        weight=W,
        gram=np.block([[state.gram, B], [B.T, C]]),
        chol=chol,
        alpha=state.alpha,
    )
