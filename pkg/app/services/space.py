"""
Finite-dimensional real inner-product spaces and linear maps.

Vectors are 1-D float64 numpy arrays. Product-space vectors (BlockVec) carry
their blocks plus a SpaceSignature so they can be flattened and rebuilt.
Linear maps expose forward and adjoint application; structured variants
(identity, negated identity, zero, scaled, block) avoid densifying the sparse
coupling patterns of coupled systems.

Inner products are computed with math.fsum over the coordinate products, so
the result is correctly rounded and does not depend on how the coordinates
are grouped into blocks or on BLAS threading.
"""

import math
from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import Optional, Sequence, Union

import numpy as np
import numpy.typing as npt

from app.core.errors import NonFiniteError, SignatureError

Vec = npt.NDArray[np.float64]


def check_finite(array: np.ndarray, name: str = "vector") -> None:
    if not np.all(np.isfinite(array)):
        raise NonFiniteError(f"{name} contains NaN or Inf")


def as_vec(values, dim: Optional[int] = None, name: str = "vector") -> Vec:
    """
    Convert values to a finite 1-D float64 vector.

    Args:
        values: Anything numpy can turn into a 1-D array
        dim: Expected dimension, if known
        name: Label used in error messages

    Returns:
        A new float64 array

    Raises:
        SignatureError: If the array is not 1-D or has the wrong dimension
        NonFiniteError: If any coordinate is NaN or Inf
    """
    vec = np.array(values, dtype=np.float64)
    if vec.ndim == 0:
        vec = vec.reshape(1)
    if vec.ndim != 1:
        raise SignatureError(f"{name} must be one-dimensional, got shape {vec.shape}")
    if dim is not None and vec.shape[0] != dim:
        raise SignatureError(f"{name} has dimension {vec.shape[0]}, expected {dim}")
    check_finite(vec, name)
    return vec


@dataclass(frozen=True)
class SpaceSignature:
    """Block dimensions of a product space H_1 ⊕ ... ⊕ H_m."""

    dims: tuple[int, ...]

    def __post_init__(self):
        if not self.dims or any(d <= 0 for d in self.dims):
            raise SignatureError(f"Invalid space signature {self.dims}")

    @property
    def total(self) -> int:
        return sum(self.dims)

    @property
    def offsets(self) -> tuple[int, ...]:
        offsets = [0]
        for d in self.dims:
            offsets.append(offsets[-1] + d)
        return tuple(offsets)

    def split(self, flat: np.ndarray) -> tuple[np.ndarray, ...]:
        """Split along the last axis into one array per block."""
        if flat.shape[-1] != self.total:
            raise SignatureError(
                f"Vector of dimension {flat.shape[-1]} does not match signature {self.dims}"
            )
        offsets = self.offsets
        return tuple(flat[..., offsets[i] : offsets[i + 1]] for i in range(len(self.dims)))

    def join(self, blocks: Sequence[np.ndarray]) -> np.ndarray:
        if len(blocks) != len(self.dims):
            raise SignatureError(f"Expected {len(self.dims)} blocks, got {len(blocks)}")
        for block, d in zip(blocks, self.dims):
            if block.shape[-1] != d:
                raise SignatureError(f"Block of dimension {block.shape[-1]} where {d} was expected")
        return np.concatenate(blocks, axis=-1)


@dataclass(frozen=True)
class BlockVec:
    """An element of a product space, one Vec per factor."""

    blocks: tuple[Vec, ...]

    def __post_init__(self):
        object.__setattr__(
            self,
            "blocks",
            tuple(as_vec(block, name=f"block {i}") for i, block in enumerate(self.blocks)),
        )

    @property
    def signature(self) -> SpaceSignature:
        return SpaceSignature(tuple(block.shape[0] for block in self.blocks))

    def flat(self) -> Vec:
        return np.concatenate(self.blocks)

    @classmethod
    def from_flat(cls, signature: SpaceSignature, flat: np.ndarray) -> "BlockVec":
        return cls(signature.split(np.asarray(flat, dtype=np.float64)))


Point = Union[Vec, BlockVec]


def flatten(u: Point) -> Vec:
    return u.flat() if isinstance(u, BlockVec) else np.asarray(u, dtype=np.float64)


def signature_of(u: Point) -> SpaceSignature:
    if isinstance(u, BlockVec):
        return u.signature
    return SpaceSignature((np.shape(u)[0],))


def rebuild(like: Point, flat: Vec) -> Point:
    """Return flat in the same representation as like."""
    if isinstance(like, BlockVec):
        return BlockVec.from_flat(like.signature, flat)
    return flat


def inner(u: Point, v: Point) -> float:
    """
    Scalar product of two vectors of the same space.

    BlockVec arguments must share their signature; the result is the sum of
    the blockwise products, which equals the flattened product exactly.
    """
    if isinstance(u, BlockVec) != isinstance(v, BlockVec):
        raise SignatureError("Cannot take the inner product of a Vec and a BlockVec")
    if isinstance(u, BlockVec) and u.signature != v.signature:
        raise SignatureError(f"Signatures {u.signature.dims} and {v.signature.dims} differ")
    fu, fv = flatten(u), flatten(v)
    if fu.shape != fv.shape:
        raise SignatureError(f"Dimensions {fu.shape[0]} and {fv.shape[0]} differ")
    return math.fsum((fu * fv).tolist())


def norm_sq(u: Point) -> float:
    return inner(u, u)


def norm(u: Point) -> float:
    return math.sqrt(norm_sq(u))


class LinearMap(ABC):
    """Bounded linear operator between coordinate spaces, with exact adjoint."""

    def __init__(self, domain_dim: int, codomain_dim: int):
        if domain_dim <= 0 or codomain_dim <= 0:
            raise SignatureError(f"Invalid map dimensions {domain_dim} -> {codomain_dim}")
        self.domain_dim = domain_dim
        self.codomain_dim = codomain_dim

    @property
    def is_zero(self) -> bool:
        return False

    @abstractmethod
    def _forward(self, x: np.ndarray) -> np.ndarray:
        pass

    @abstractmethod
    def _adjoint(self, y: np.ndarray) -> np.ndarray:
        pass

    def apply(self, x: np.ndarray) -> np.ndarray:
        if np.shape(x)[-1] != self.domain_dim:
            raise SignatureError(
                f"Map expects inputs of dimension {self.domain_dim}, got {np.shape(x)[-1]}"
            )
        return self._forward(x)

    def adjoint_apply(self, y: np.ndarray) -> np.ndarray:
        if np.shape(y)[-1] != self.codomain_dim:
            raise SignatureError(
                f"Adjoint expects inputs of dimension {self.codomain_dim}, got {np.shape(y)[-1]}"
            )
        return self._adjoint(y)

    def to_dense(self) -> np.ndarray:
        """Dense matrix representation, built column by column."""
        return self.apply(np.eye(self.domain_dim)).T.copy()

    def describe(self) -> str:
        return f"{type(self).__name__}({self.domain_dim}->{self.codomain_dim})"


class DenseMap(LinearMap):
    def __init__(self, matrix):
        matrix = np.array(matrix, dtype=np.float64)
        if matrix.ndim != 2:
            raise SignatureError(f"Dense map needs a 2-D matrix, got shape {matrix.shape}")
        check_finite(matrix, "matrix")
        super().__init__(domain_dim=matrix.shape[1], codomain_dim=matrix.shape[0])
        self.matrix = matrix
        self.matrix.setflags(write=False)

    def _forward(self, x):
        return x @ self.matrix.T

    def _adjoint(self, y):
        return y @ self.matrix

    def to_dense(self):
        return self.matrix.copy()


class IdentityMap(LinearMap):
    def __init__(self, dim: int):
        super().__init__(dim, dim)

    def _forward(self, x):
        return np.array(x, dtype=np.float64)

    def _adjoint(self, y):
        return np.array(y, dtype=np.float64)


class NegatedIdentityMap(LinearMap):
    def __init__(self, dim: int):
        super().__init__(dim, dim)

    def _forward(self, x):
        return -np.asarray(x, dtype=np.float64)

    def _adjoint(self, y):
        return -np.asarray(y, dtype=np.float64)


class ZeroMap(LinearMap):
    @property
    def is_zero(self) -> bool:
        return True

    def _forward(self, x):
        return np.zeros(np.shape(x)[:-1] + (self.codomain_dim,))

    def _adjoint(self, y):
        return np.zeros(np.shape(y)[:-1] + (self.domain_dim,))


class ScaledMap(LinearMap):
    """c·L for a scalar c."""

    def __init__(self, base: LinearMap, scale: float):
        if not math.isfinite(scale):
            raise NonFiniteError("Scale factor must be finite")
        super().__init__(base.domain_dim, base.codomain_dim)
        self.base = base
        self.scale = float(scale)

    @property
    def is_zero(self) -> bool:
        return self.scale == 0.0 or self.base.is_zero

    def _forward(self, x):
        return self.scale * self.base.apply(x)

    def _adjoint(self, y):
        return self.scale * self.base.adjoint_apply(y)


class BlockMap(LinearMap):
    """
    Block operator (L_ki) from H_1 ⊕ ... ⊕ H_m to G_1 ⊕ ... ⊕ G_K.

    Row k maps into G_k, column i reads H_i. Zero blocks are skipped in the
    sums, which run in ascending block order so results are reproducible.
    """

    def __init__(self, grid: Sequence[Sequence[LinearMap]]):
        if not grid or not grid[0]:
            raise SignatureError("Block map needs at least one row and one column")
        n_cols = len(grid[0])
        for k, row in enumerate(grid):
            if len(row) != n_cols:
                raise SignatureError(f"Row {k} has {len(row)} blocks, expected {n_cols}")
        row_dims = []
        for k, row in enumerate(grid):
            dims = {block.codomain_dim for block in row}
            if len(dims) != 1:
                raise SignatureError(f"Row {k} mixes codomain dimensions {sorted(dims)}")
            row_dims.append(dims.pop())
        col_dims = []
        for i in range(n_cols):
            dims = {row[i].domain_dim for row in grid}
            if len(dims) != 1:
                raise SignatureError(f"Column {i} mixes domain dimensions {sorted(dims)}")
            col_dims.append(dims.pop())

        self.grid = tuple(tuple(row) for row in grid)
        self.domain_signature = SpaceSignature(tuple(col_dims))
        self.codomain_signature = SpaceSignature(tuple(row_dims))
        super().__init__(self.domain_signature.total, self.codomain_signature.total)

    @property
    def is_zero(self) -> bool:
        return all(block.is_zero for row in self.grid for block in row)

    def _forward(self, x):
        x_blocks = self.domain_signature.split(np.asarray(x, dtype=np.float64))
        out = []
        for k, row in enumerate(self.grid):
            acc = None
            for i, block in enumerate(row):
                if block.is_zero:
                    continue
                term = block.apply(x_blocks[i])
                acc = term if acc is None else acc + term
            if acc is None:
                acc = np.zeros(np.shape(x)[:-1] + (self.codomain_signature.dims[k],))
            out.append(acc)
        return self.codomain_signature.join(out)

    def _adjoint(self, y):
        y_blocks = self.codomain_signature.split(np.asarray(y, dtype=np.float64))
        out = []
        for i, dim in enumerate(self.domain_signature.dims):
            acc = None
            for k, row in enumerate(self.grid):
                block = row[i]
                if block.is_zero:
                    continue
                term = block.adjoint_apply(y_blocks[k])
                acc = term if acc is None else acc + term
            if acc is None:
                acc = np.zeros(np.shape(y)[:-1] + (dim,))
            out.append(acc)
        return self.domain_signature.join(out)


def apply(L: LinearMap, x: Vec) -> Vec:
    return L.apply(x)


def adjoint_apply(L: LinearMap, y: Vec) -> Vec:
    return L.adjoint_apply(y)


def operator_norm_estimate(L: LinearMap, iters: int = 50, seed: int = 0) -> float:
    """
    Power-iteration lower bound on ‖L‖.

    Only used for diagnostics (the α constant of the G_α certificate); the
    solver never needs it. The returned value is the running maximum of
    ‖L x_k‖ over unit vectors x_k, so it never decreases with more iterations.
    """
    if iters < 1:
        raise ValueError("iters must be at least 1")
    if L.is_zero:
        return 0.0
    rng = np.random.default_rng(seed)
    x = rng.standard_normal(L.domain_dim)
    x /= np.linalg.norm(x)
    best = 0.0
    for _ in range(iters):
        y = L.apply(x)
        best = max(best, float(np.linalg.norm(y)))
        z = L.adjoint_apply(y)
        z_norm = float(np.linalg.norm(z))
        if z_norm == 0.0:
            break
        x = z / z_norm
    return best
