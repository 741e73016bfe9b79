"""Fixed hash stage: PCA followed by iterative quantization.

The hash functions are learned once from a small initialisation sample and
never change afterwards. Features are centred, projected onto the top-K
principal directions, and an orthogonal rotation is refined by alternating
minimisation of the quantization error ||B - V R||_F^2. Encoding is then
h = sign(W^T x + b) with W the rotated principal directions and
b = -W^T mean, so the sample mean encodes to the all-(+1) code.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .codes import sign
from .errors import DegenerateDataError

DEFAULT_ITQ_ITERS = 50

# Relative eigenvalue cutoff below which a direction is treated as noise.
RANK_RTOL = 1e-9


@dataclass(eq=False)
class HashModel:
    """Frozen encoder state plus fit diagnostics.

    W:            (dim, nbits) projection, principal directions composed
                  with the quantization rotation.
    b:            (nbits,) offset, -W^T feature_mean.
    feature_mean: (dim,) mean of the initialisation sample.
    rotation:     (nbits, nbits) orthogonal rotation found by the fit.
    itq_errors:   quantization error before the first rotation update and
                  after each of the `iters` updates (length iters + 1,
                  non-increasing).
    itq_orth_devs: max |R^T R - I| entry at the same checkpoints.
    """

    W: np.ndarray
    b: np.ndarray
    feature_mean: np.ndarray
    rotation: np.ndarray
    nbits: int
    dim: int
    seed: int
    itq_errors: np.ndarray
    itq_orth_devs: np.ndarray


def quantization_error(V: np.ndarray, B: np.ndarray, rotation: np.ndarray) -> float:
    """Squared Frobenius distance ||B - V @ rotation||_F^2."""
    V = np.asarray(V, dtype=np.float64)
    B = np.asarray(B, dtype=np.float64)
    rotation = np.asarray(rotation, dtype=np.float64)
    if V.ndim != 2 or B.shape != V.shape:
        raise ValueError(f"V and B must share a 2-D shape, got {V.shape} and {B.shape}")
    k = V.shape[1]
    if rotation.shape != (k, k):
        raise ValueError(f"rotation must be {k}x{k}, got {rotation.shape}")
    if not np.all(np.abs(B) == 1):
        raise ValueError("B entries must be -1 or +1")
    diff = B - V @ rotation
    return float(np.sum(diff * diff))


def _orthogonality_deviation(rotation: np.ndarray) -> float:
    k = rotation.shape[0]
    return float(np.max(np.abs(rotation.T @ rotation - np.eye(k))))


def _random_orthogonal(rng: np.random.Generator, k: int) -> np.ndarray:
    # QR of a Gaussian matrix; column signs fixed by the R diagonal so the
    # result is a deterministic function of the seed.
    q, r = np.linalg.qr(rng.standard_normal((k, k)))
    d = np.sign(np.diag(r))
    d[d == 0] = 1.0
    return q * d


def fit_pca_itq(
    X: np.ndarray,
    nbits: int,
    iters: int = DEFAULT_ITQ_ITERS,
    seed: int = 0,
) -> HashModel:
    """Fit the fixed hash stage on an initialisation sample.

    X is (N, dim) with N >= nbits and dim >= nbits. Raises
    DegenerateDataError when the sample covariance has rank < nbits
    (e.g. all points identical).
    """
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2:
        raise ValueError(f"X must be 2-D, got shape {X.shape}")
    n, dim = X.shape
    if nbits < 1:
        raise ValueError("nbits must be positive")
    if iters < 1:
        raise ValueError("iters must be positive")
    if dim < nbits:
        raise ValueError(f"feature dimension {dim} cannot carry {nbits} bits")
    if n < nbits:
        raise ValueError(f"need at least {nbits} initialisation points, got {n}")

    mean = X.mean(axis=0)
    centred = X - mean
    cov = (centred.T @ centred) / n
    evals, evecs = np.linalg.eigh(cov)
    order = np.argsort(evals)[::-1]
    evals = evals[order]
    evecs = evecs[:, order]

    lead = max(float(evals[0]), 0.0)
    if lead <= 0.0 or float(evals[nbits - 1]) <= lead * RANK_RTOL:
        raise DegenerateDataError(
            f"initialisation covariance has rank < {nbits}; add more varied points"
        )

    directions = evecs[:, :nbits].copy()
    # Deterministic eigenvector orientation: largest-magnitude entry positive.
    anchor = np.abs(directions).argmax(axis=0)
    flip = directions[anchor, np.arange(nbits)] < 0
    directions[:, flip] *= -1.0

    V = centred @ directions
    rng = np.random.default_rng(seed)
    rotation = _random_orthogonal(rng, nbits)

    errors = []
    orth = []
    B = sign(V @ rotation).astype(np.float64)
    errors.append(quantization_error(V, B, rotation))
    orth.append(_orthogonality_deviation(rotation))
    for _ in range(iters):
        B = sign(V @ rotation).astype(np.float64)
        u, _, vt = np.linalg.svd(V.T @ B)
        rotation = u @ vt
        errors.append(quantization_error(V, B, rotation))
        orth.append(_orthogonality_deviation(rotation))

    W = directions @ rotation
    b = -(W.T @ mean)
    return HashModel(
        W=W,
        b=b,
        feature_mean=mean,
        rotation=rotation,
        nbits=nbits,
        dim=dim,
        seed=seed,
        itq_errors=np.array(errors),
        itq_orth_devs=np.array(orth),
    )


def encode(model: HashModel, x: np.ndarray) -> np.ndarray:
    """Hash one feature vector to a +-1 int8 code."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (model.dim,):
        raise ValueError(f"expected shape ({model.dim},), got {x.shape}")
    return sign(model.W.T @ x + model.b)


def encode_batch(model: HashModel, X: np.ndarray) -> np.ndarray:
    """Hash (N, dim) features to an (N, nbits) +-1 int8 code matrix."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != model.dim:
        raise ValueError(f"expected shape (N, {model.dim}), got {X.shape}")
    return sign(X @ model.W + model.b)
