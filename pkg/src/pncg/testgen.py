"""Synthetic CP benchmark tensors with controlled collinearity and noise.

Random streams use numpy's Philox counter-based generator. Each stream is
keyed by a tuple of labels (for example ``("noise", I, R, C, l1, l2)``)
mixed with the master seed, so an instance never depends on generation order.
"""
from __future__ import annotations

import hashlib
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .kruskal import KruskalModel, full
from .tensor import DenseTensor, frobenius_norm


def _label_words(labels) -> list[int]:
    words = []
    for lab in labels:
        digest = hashlib.sha256(repr(lab).encode()).digest()
        words.append(int.from_bytes(digest[:4], "little"))
    return words


def stream(seed: int, *labels) -> np.random.Generator:
    """Independent generator for ``labels`` under master ``seed``."""
    ss = np.random.SeedSequence(entropy=int(seed) % 2**64, spawn_key=_label_words(labels))
    return np.random.Generator(np.random.Philox(ss))


def collinearity_label(c: float) -> int:
    return int(round(c * 1_000_000))


@dataclass(frozen=True)
class TestProblemSpec:
    __test__ = False  # not a pytest class

    I: int
    R: int
    C: float
    l1: float
    l2: float
    seed: int = 0

    def __post_init__(self):
        if not 0 <= self.C < 1:
            raise ValueError(f"collinearity must lie in [0, 1), got {self.C}")
        if not 0 < self.l1 < 100:
            raise ValueError(f"homoskedastic noise percent must lie in (0, 100), got {self.l1}")
        if not 0 <= self.l2 < 100:
            raise ValueError(f"heteroskedastic noise percent must lie in [0, 100), got {self.l2}")
        if not 1 <= self.R <= self.I:
            raise ValueError(f"need 1 <= R <= I, got R={self.R}, I={self.I}")


def collinear_factors(I: int, R: int, C: float, rng: np.random.Generator) -> np.ndarray:
    """``I x R`` matrix with unit columns and pairwise inner products exactly ``C``.

    Takes the Cholesky factor ``U`` of the target Gram ``(1-C) I + C 11^T``
    and maps it through a random orthonormal basis ``Q``: ``(QU)^T QU = U^T U``.
    """
    if R > I:
        raise ValueError(f"rank {R} exceeds mode size {I}")
    if not 0 <= C < 1:
        raise ValueError(f"collinearity must lie in [0, 1), got {C}")
    gram = (1.0 - C) * np.eye(R) + C * np.ones((R, R))
    upper = np.linalg.cholesky(gram).T
    q, _ = np.linalg.qr(rng.standard_normal((I, R)))
    return q @ upper


def make_truth(I: int, R: int, C: float, rng: np.random.Generator, order: int = 3) -> KruskalModel:
    return KruskalModel(tuple(collinear_factors(I, R, C, rng) for _ in range(order)))


def add_noise(x: DenseTensor, l1: float, l2: float, rng: np.random.Generator) -> DenseTensor:
    """Homoskedastic noise at ``l1`` percent, then heteroskedastic at ``l2`` percent.

    Both noise tensors are always drawn, in that order, so the number of
    values consumed from ``rng`` does not depend on ``l2``.
    """
    n1 = rng.standard_normal(x.dims)
    n2 = rng.standard_normal(x.dims)
    scale1 = (100.0 / l1 - 1.0) ** -0.5 * frobenius_norm(x) / np.linalg.norm(n1.ravel())
    x1 = DenseTensor(x.data + scale1 * n1)
    if l2 == 0:
        return x1
    hetero = n2 * x1.data
    scale2 = (100.0 / l2 - 1.0) ** -0.5 * frobenius_norm(x1) / np.linalg.norm(hetero.ravel())
    return DenseTensor(x1.data + scale2 * hetero)


def make_test_tensor(spec: TestProblemSpec, rng: np.random.Generator | None = None):
    """Return ``(noisy tensor, truth model)`` for ``spec``.

    Without an explicit ``rng`` the truth comes from the ``("truth", I, R, C)``
    stream and the noise from ``("noise", I, R, C, l1, l2)``, both under
    ``spec.seed``. With ``rng`` given, both are drawn from it in sequence.
    """
    key = (spec.I, spec.R, collinearity_label(spec.C))
    truth_rng = rng or stream(spec.seed, "truth", *key)
    noise_rng = rng or stream(spec.seed, "noise", *key, float(spec.l1), float(spec.l2))
    truth = make_truth(spec.I, spec.R, spec.C, truth_rng)
    return add_noise(full(truth), spec.l1, spec.l2, noise_rng), truth


def random_init(dims: Sequence[int], R: int, rng: np.random.Generator) -> KruskalModel:
    """Starting model with entries i.i.d. uniform on ``[0, 1)``."""
    return KruskalModel(tuple(rng.random((d, R)) for d in dims))
