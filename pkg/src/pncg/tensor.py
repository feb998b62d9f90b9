"""Dense N-way tensors and the multilinear kernels shared by every solver.

Storage follows the column-major convention: the linear index of entry
``(i_1, ..., i_N)`` runs with ``i_1`` fastest. Mode indices in this module
are zero-based, as everywhere else in the package.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import reduce
from pathlib import Path
from typing import Sequence

import numpy as np

MAX_ORDER = 8
MAX_ENTRIES = 10**8


class CapacityError(ValueError):
    """Raised when a dense tensor would exceed the supported order or entry count."""


def _check_capacity(dims: Sequence[int]) -> None:
    if len(dims) > MAX_ORDER:
        raise CapacityError(f"tensor order {len(dims)} exceeds the supported maximum {MAX_ORDER}")
    if int(np.prod(dims, dtype=np.float64)) > MAX_ENTRIES:
        raise CapacityError(f"tensor with dims {tuple(dims)} exceeds {MAX_ENTRIES} entries")


@dataclass(frozen=True, eq=False)
class DenseTensor:
    """Immutable dense real tensor.

    ``data`` is an N-dimensional float64 array indexed as ``data[i_1, ..., i_N]``.
    Use :meth:`from_values` to build one from a column-major value list.
    """

    data: np.ndarray

    def __post_init__(self):
        data = np.array(self.data, dtype=np.float64, copy=True)
        if data.ndim < 1:
            raise ValueError("a tensor needs at least one mode")
        if any(d < 1 for d in data.shape):
            raise ValueError(f"every extent must be positive, got {data.shape}")
        _check_capacity(data.shape)
        if not np.all(np.isfinite(data)):
            raise ValueError("tensor entries must be finite")
        data.flags.writeable = False
        object.__setattr__(self, "data", data)

    @classmethod
    def from_values(cls, dims: Sequence[int], values) -> "DenseTensor":
        dims = tuple(int(d) for d in dims)
        if not dims or any(d < 1 for d in dims):
            raise ValueError(f"invalid dims {dims}")
        _check_capacity(dims)
        values = np.asarray(values, dtype=np.float64).ravel()
        if values.size != int(np.prod(dims)):
            raise ValueError(f"{values.size} values do not fill dims {dims}")
        return cls(values.reshape(dims, order="F"))

    @classmethod
    def zeros(cls, dims: Sequence[int]) -> "DenseTensor":
        return cls(np.zeros(tuple(dims)))

    @property
    def dims(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    @property
    def values(self) -> np.ndarray:
        """Entries in column-major linear order."""
        return self.data.ravel(order="F")

    def __sub__(self, other: "DenseTensor") -> "DenseTensor":
        return DenseTensor(self.data - other.data)

    def __add__(self, other: "DenseTensor") -> "DenseTensor":
        return DenseTensor(self.data + other.data)

    def __repr__(self):
        return f"DenseTensor(dims={self.dims})"


def _check_mode(ndim: int, n: int) -> None:
    if not 0 <= n < ndim:
        raise ValueError(f"mode {n} out of range for a {ndim}-way tensor")


def matricize(t: DenseTensor, n: int) -> np.ndarray:
    """Mode-``n`` unfolding ``X_(n)`` of shape ``(I_n, K / I_n)``.

    Column ``j`` enumerates the remaining indices in increasing-mode
    column-major order (lowest remaining mode fastest).
    """
    _check_mode(t.ndim, n)
    return np.moveaxis(t.data, n, 0).reshape(t.dims[n], -1, order="F")


def fold(matrix: np.ndarray, n: int, dims: Sequence[int]) -> DenseTensor:
    """Inverse of :func:`matricize`."""
    dims = tuple(dims)
    _check_mode(len(dims), n)
    moved = (dims[n],) + dims[:n] + dims[n + 1:]
    matrix = np.asarray(matrix, dtype=np.float64)
    if matrix.shape != (dims[n], int(np.prod(moved[1:]))):
        raise ValueError(f"matrix of shape {matrix.shape} cannot fold to {dims} along mode {n}")
    return DenseTensor(np.moveaxis(matrix.reshape(moved, order="F"), 0, n))


def khatri_rao(matrices: Sequence[np.ndarray]) -> np.ndarray:
    """Columnwise Kronecker product; the last matrix's row index varies fastest."""
    if len(matrices) == 0:
        raise ValueError("khatri_rao needs at least one matrix")
    mats = [np.asarray(m, dtype=np.float64) for m in matrices]
    ncols = mats[0].shape[1]
    if any(m.ndim != 2 or m.shape[1] != ncols for m in mats):
        raise ValueError("all matrices must be 2-D with the same number of columns")

    def _pair(left, right):
        return (left[:, None, :] * right[None, :, :]).reshape(-1, ncols)

    return reduce(_pair, mats)


def _check_factors(dims: Sequence[int], factors: Sequence[np.ndarray]) -> int:
    if len(factors) != len(dims):
        raise ValueError(f"expected {len(dims)} factor matrices, got {len(factors)}")
    rank = factors[0].shape[1]
    for k, (d, a) in enumerate(zip(dims, factors)):
        if a.ndim != 2 or a.shape != (d, rank):
            raise ValueError(f"factor {k} has shape {a.shape}, expected ({d}, {rank})")
    return rank


def mttkrp_reference(t: DenseTensor, factors: Sequence[np.ndarray], n: int) -> np.ndarray:
    """``X_(n)`` times the Khatri-Rao product of all factors but ``n``, formed explicitly."""
    _check_mode(t.ndim, n)
    _check_factors(t.dims, factors)
    others = [factors[m] for m in reversed(range(t.ndim)) if m != n]
    if not others:
        return matricize(t, n).copy()
    return matricize(t, n) @ khatri_rao(others)


def mttkrp(t: DenseTensor, factors: Sequence[np.ndarray], n: int) -> np.ndarray:
    """Matricized tensor times Khatri-Rao product without forming either operand.

    Contracts the highest remaining mode first with a single tensordot, then
    absorbs the other modes one at a time while carrying the rank index.
    """
    _check_mode(t.ndim, n)
    rank = _check_factors(t.dims, factors)
    others = [m for m in range(t.ndim) if m != n]
    if not others:
        return np.repeat(t.data[:, None], rank, axis=1)
    last = others.pop()
    # partial has the surviving modes in increasing order, then the rank axis
    partial = np.tensordot(t.data, factors[last], axes=(last, 0))
    for m in reversed(others):
        # every mode below m is still present, so m sits at axis m
        partial = np.einsum(
            partial, list(range(partial.ndim)), factors[m], [m, partial.ndim - 1],
            [k for k in range(partial.ndim) if k != m],
        )
    return partial


def frobenius_norm(t: DenseTensor) -> float:
    return float(np.linalg.norm(t.data.ravel()))


def inner(a: DenseTensor, b: DenseTensor) -> float:
    if a.dims != b.dims:
        raise ValueError("dims mismatch")
    return float(np.dot(a.data.ravel(), b.data.ravel()))


def write_tensor(t: DenseTensor, path, per_line: int | None = None) -> None:
    """Write the text tensor format: a ``dims:`` header then column-major values."""
    per_line = per_line or t.dims[0]
    vals = t.values
    lines = ["dims: " + " ".join(str(d) for d in t.dims)]
    for start in range(0, vals.size, per_line):
        lines.append(" ".join(repr(float(v)) for v in vals[start:start + per_line]))
    Path(path).write_text("\n".join(lines) + "\n")


def _data_lines(text: str):
    for raw in text.splitlines():
        line = raw.strip()
        if line and not line.startswith("#"):
            yield line


def parse_tensor(text: str) -> DenseTensor:
    lines = list(_data_lines(text))
    if not lines or not lines[0].startswith("dims:"):
        raise ValueError("tensor text must start with a 'dims:' line")
    dims = [int(tok) for tok in lines[0][len("dims:"):].split()]
    values = [float(tok) for line in lines[1:] for tok in line.split()]
    return DenseTensor.from_values(dims, values)


def read_tensor(path) -> DenseTensor:
    return parse_tensor(Path(path).read_text())
