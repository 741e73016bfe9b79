"""Target codes for supervision: random hyperplane hashing of label sets.

Each class gets a fixed Gaussian row; the target ("ideal") code of a point
is the sign of the summed rows of its active classes. Points sharing
classes collide in expectation, disjoint label sets do not.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .codes import sign
from .errors import EmptyLabelError


@dataclass(frozen=True, eq=False)
class LabelHashMatrix:
    """Per-class Gaussian directions, (n_classes, nbits)."""

    L: np.ndarray
    n_classes: int
    nbits: int
    seed: int


def sample_label_matrix(n_classes: int, nbits: int, seed: int) -> LabelHashMatrix:
    """Draw the fixed label directions from a seeded generator."""
    if n_classes < 1:
        raise ValueError("n_classes must be positive")
    if nbits < 1:
        raise ValueError("nbits must be positive")
    rng = np.random.default_rng(seed)
    L = rng.standard_normal((n_classes, nbits))
    L.setflags(write=False)
    return LabelHashMatrix(L=L, n_classes=n_classes, nbits=nbits, seed=seed)


def ideal_code(label_matrix: LabelHashMatrix, labels) -> np.ndarray:
    """Target +-1 code of a label set; order-insensitive, empty set rejected."""
    idx = np.unique(np.fromiter(labels, dtype=np.int64))
    if idx.size == 0:
        raise EmptyLabelError("cannot derive a target code from an empty label set")
    if idx[0] < 0 or idx[-1] >= label_matrix.n_classes:
        raise ValueError(
            f"labels must lie in [0, {label_matrix.n_classes}), got {idx.tolist()}"
        )
    return sign(label_matrix.L[idx].sum(axis=0))
