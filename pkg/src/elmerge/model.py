"""Random feature maps and hidden-layer evaluation.

A random-feature (ELM) network keeps its input-to-hidden weights frozen at
random values; the only trained parameter is the hidden-to-output weight
matrix.  This module owns the frozen part: drawing the random map, evaluating
the hidden-layer matrix H, and slicing a map into column-consecutive
subnetworks.

Shape conventions used throughout the package:

* ``X`` is ``(d, n)``: one sample per column.
* ``H`` is ``(n, m)``: row i holds the hidden activations of sample i.
* ``W`` is ``(m, c)``: hidden-to-output weights, one column per output.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from enum import Enum
from pathlib import Path

import numpy as np
from scipy.linalg.blas import dgemm
from scipy.spatial.distance import cdist
from scipy.special import expit

#: Name of the generator behind every random draw, recorded in reports.
RNG_ALGORITHM = "numpy-PCG64"

#: 8-byte magic prefix of the binary weight dump format.
WEIGHT_MAGIC = b"ELMWGT01"

# Hidden-matrix evaluation switches from an exact per-pair distance kernel to
# a BLAS-based one above this many (sample x input-dim) entries.  The
# threshold deliberately ignores the hidden count so that a sub-map block is
# evaluated by the same code path as its parent.
_DENSE_KERNEL_LIMIT = 1 << 16


class Activation(str, Enum):
    """Supported hidden-unit nonlinearities.

    ``SIGMOID`` squashes with 1 / (1 + exp(x'a + b)); note the plus sign in
    the exponent.  ``RADBAS`` is the radial unit exp(-b * ||x - a||) with a
    strictly positive width b.
    """

    SIGMOID = "sigmoid"
    RADBAS = "radbas"


@dataclass(frozen=True)
class RandomFeatureMap:
    """Frozen input weights and biases of a hidden layer.

    ``weights`` has one row per hidden unit (shape ``(hidden_count,
    input_dim)``); ``biases`` has one entry per unit.  ``seed`` records the
    draw that produced the parent map; maps returned by
    :func:`split_feature_map` keep the parent's seed.
    """

    input_dim: int
    hidden_count: int
    weights: np.ndarray
    biases: np.ndarray
    activation: Activation
    seed: int

    def __post_init__(self):
        if self.weights.shape != (self.hidden_count, self.input_dim):
            raise ValueError(
                f"weights shape {self.weights.shape} does not match "
                f"(hidden_count, input_dim)=({self.hidden_count}, {self.input_dim})"
            )
        if self.biases.shape != (self.hidden_count,):
            raise ValueError(f"biases shape {self.biases.shape} is not ({self.hidden_count},)")
        self.weights.setflags(write=False)
        self.biases.setflags(write=False)


def generate_feature_map(
    input_dim: int,
    hidden_count: int,
    activation: Activation,
    seed: int,
) -> RandomFeatureMap:
    """Draw a fresh random feature map, deterministically per seed.

    Weights are i.i.d. uniform on [-1, 1].  Sigmoid biases are uniform on
    [-1, 1]; radial-basis biases are uniform on (0, 1] so the unit output
    stays bounded.
    """
    if input_dim < 1:
        raise ValueError(f"input_dim must be >= 1, got {input_dim}")
    if hidden_count < 1:
        raise ValueError(f"hidden_count must be >= 1, got {hidden_count}")
    activation = Activation(activation)
    rng = np.random.default_rng(seed)
    weights = rng.uniform(-1.0, 1.0, size=(hidden_count, input_dim))
    if activation is Activation.SIGMOID:
        biases = rng.uniform(-1.0, 1.0, size=hidden_count)
    else:
        # 1 - U[0,1) lies in (0, 1]
        biases = 1.0 - rng.random(hidden_count)
    return RandomFeatureMap(input_dim, hidden_count, weights, biases, activation, seed)


def compute_hidden_matrix(fmap: RandomFeatureMap, samples: np.ndarray) -> np.ndarray:
    """Evaluate the hidden layer on every sample.

    ``samples`` is ``(input_dim, n)`` with one sample per column.  Returns the
    ``(n, hidden_count)`` matrix whose (i, j) entry is the output of hidden
    unit j on sample i.
    """
    X = np.asarray(samples, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] != fmap.input_dim:
        raise ValueError(
            f"samples must be (input_dim={fmap.input_dim}, n), got shape {X.shape}"
        )
    if not np.all(np.isfinite(X)):
        raise ValueError("samples contain non-finite values")

    # The products below go through BLAS dgemm directly rather than `@`:
    # numpy routes single-column products to gemv, whose summation order
    # differs, and sub-map evaluation must reproduce the parent's columns
    # bit-for-bit regardless of block width.
    if fmap.activation is Activation.SIGMOID:
        # 1/(1+exp(t)) == expit(-t), evaluated stably for large |t|.
        arg = dgemm(1.0, X.T, fmap.weights.T)
        arg += fmap.biases
        return expit(-arg, out=arg)

    n = X.shape[1]
    if n * fmap.input_dim <= _DENSE_KERNEL_LIMIT:
        dist = cdist(X.T, fmap.weights)
    else:
        # ||x - a||^2 = ||x||^2 + ||a||^2 - 2 x'a via one GEMM; rounding can
        # push tiny squared distances below zero, so clamp before the sqrt.
        sq = dgemm(-2.0, X.T, fmap.weights.T)
        sq += np.einsum("ij,ij->j", X, X)[:, None]
        sq += np.einsum("ij,ij->i", fmap.weights, fmap.weights)[None, :]
        np.maximum(sq, 0.0, out=sq)
        dist = np.sqrt(sq, out=sq)
    dist *= -fmap.biases
    return np.exp(dist, out=dist)


def split_feature_map(fmap: RandomFeatureMap, block_sizes) -> list[RandomFeatureMap]:
    """Slice a map into consecutive subnetworks of the given sizes.

    The hidden matrices of the returned maps, concatenated column-wise in
    order, reproduce the parent's hidden matrix exactly.
    """
    sizes = [int(s) for s in block_sizes]
    if any(s < 1 for s in sizes):
        raise ValueError(f"block sizes must be positive, got {sizes}")
    if sum(sizes) != fmap.hidden_count:
        raise ValueError(
            f"block sizes {sizes} sum to {sum(sizes)}, expected {fmap.hidden_count}"
        )
    blocks = []
    offset = 0
    for size in sizes:
        blocks.append(
            RandomFeatureMap(
                input_dim=fmap.input_dim,
                hidden_count=size,
                weights=fmap.weights[offset : offset + size],
                biases=fmap.biases[offset : offset + size],
                activation=fmap.activation,
                seed=fmap.seed,
            )
        )
        offset += size
    return blocks


def concat_feature_maps(first: RandomFeatureMap, second: RandomFeatureMap) -> RandomFeatureMap:
    """Stack two maps of the same input dimension and activation."""
    if first.input_dim != second.input_dim:
        raise ValueError(
            f"input_dim mismatch: {first.input_dim} vs {second.input_dim}"
        )
    if first.activation is not second.activation:
        raise ValueError(
            f"activation mismatch: {first.activation.value} vs {second.activation.value}"
        )
    return RandomFeatureMap(
        input_dim=first.input_dim,
        hidden_count=first.hidden_count + second.hidden_count,
        weights=np.vstack([first.weights, second.weights]),
        biases=np.concatenate([first.biases, second.biases]),
        activation=first.activation,
        seed=first.seed,
    )


def save_weights(weights: np.ndarray, path) -> None:
    """Write an output-weight matrix as magic + u32 dims + little-endian f64."""
    W = np.ascontiguousarray(weights, dtype=np.float64)
    if W.ndim != 2:
        raise ValueError(f"weights must be 2-D, got shape {W.shape}")
    with open(path, "wb") as fh:
        fh.write(WEIGHT_MAGIC)
        fh.write(struct.pack("<II", W.shape[0], W.shape[1]))
        fh.write(W.astype("<f8").tobytes(order="C"))


def load_weights(path) -> np.ndarray:
    """Read a matrix written by :func:`save_weights`."""
    raw = Path(path).read_bytes()
    if raw[:8] != WEIGHT_MAGIC:
        raise ValueError(f"{path}: bad magic {raw[:8]!r}, expected {WEIGHT_MAGIC!r}")
    rows, cols = struct.unpack("<II", raw[8:16])
    expected = 16 + rows * cols * 8
    if len(raw) != expected:
        raise ValueError(f"{path}: expected {expected} bytes, found {len(raw)}")
    data = np.frombuffer(raw, dtype="<f8", offset=16)
    return data.reshape(rows, cols).astype(np.float64)
