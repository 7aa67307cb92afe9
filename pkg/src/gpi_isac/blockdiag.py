"""Block-diagonal Hermitian matrices acting on stacked beamformers.

Every lifted matrix in the beamforming problem has the form
``diag(M_0, ..., M_{B-1})`` with Hermitian N x N blocks, one per column of
F.  A stacked vector ``vec(F)`` is handled as an array of shape (B, N)
whose row ``j`` is column ``j`` of F.
"""

from __future__ import annotations

from typing import Mapping, Optional

import numpy as np
import scipy.linalg


class SingularBlockError(np.linalg.LinAlgError):
    """A diagonal block is not positive definite."""

    def __init__(self, index: int):
        super().__init__(f"block {index} is not positive definite")
        self.index = index


class BlockDiagHermitian:
    """Block-diagonal matrix with ``n_blocks`` Hermitian blocks of size N."""

    __slots__ = ("blocks",)

    def __init__(self, blocks):
        blocks = np.array(blocks, dtype=complex)
        if blocks.ndim != 3 or blocks.shape[1] != blocks.shape[2]:
            raise ValueError("blocks must have shape (n_blocks, N, N)")
        self.blocks = blocks

    @classmethod
    def from_shared(cls, shared, n_blocks: int,
                    overrides: Optional[Mapping[int, np.ndarray]] = None):
        """Every block equal to ``shared`` except those listed in ``overrides``."""
        shared = np.asarray(shared, dtype=complex)
        blocks = np.broadcast_to(shared, (n_blocks,) + shared.shape).copy()
        for j, blk in (overrides or {}).items():
            blocks[j] = blk
        return cls(blocks)

    @classmethod
    def identity(cls, n_blocks: int, size: int):
        return cls.from_shared(np.eye(size), n_blocks)

    @property
    def n_blocks(self) -> int:
        return self.blocks.shape[0]

    @property
    def block_size(self) -> int:
        return self.blocks.shape[1]

    @property
    def shape(self) -> tuple:
        n = self.n_blocks * self.block_size
        return (n, n)

    def _split(self, v) -> np.ndarray:
        return np.asarray(v).reshape(self.n_blocks, self.block_size)

    def matvec(self, v) -> np.ndarray:
        x = self._split(v)
        return np.einsum("bij,bj->bi", self.blocks, x).reshape(-1)

    __matmul__ = matvec

    def quad(self, v) -> float:
        """Real part of v^H M v."""
        x = self._split(v)
        return float(np.real(np.einsum("bi,bij,bj->", x.conj(), self.blocks, x)))

    def solve(self, v) -> np.ndarray:
        """M^{-1} v with independent per-block solves, O(B N^3)."""
        x = self._split(v)
        try:
            np.linalg.cholesky(self.blocks)
        except np.linalg.LinAlgError:
            for j in range(self.n_blocks):
                try:
                    np.linalg.cholesky(self.blocks[j])
                except np.linalg.LinAlgError:
                    raise SingularBlockError(j) from None
            raise
        return np.linalg.solve(self.blocks, x[..., None])[..., 0].reshape(-1)

    def hermitian_error(self) -> float:
        """Largest entrywise deviation from Hermitian symmetry."""
        return float(np.max(np.abs(self.blocks - self.blocks.conj().transpose(0, 2, 1)),
                            initial=0.0))

    def to_dense(self) -> np.ndarray:
        """Materialize the full matrix (tests and small oracles only)."""
        return scipy.linalg.block_diag(*self.blocks)

    def __add__(self, other: "BlockDiagHermitian") -> "BlockDiagHermitian":
        return BlockDiagHermitian(self.blocks + other.blocks)

    def __mul__(self, scalar) -> "BlockDiagHermitian":
        return BlockDiagHermitian(self.blocks * scalar)

    __rmul__ = __mul__

    def __repr__(self) -> str:
        return f"BlockDiagHermitian(n_blocks={self.n_blocks}, block_size={self.block_size})"


def blockdiag_solve(omega: BlockDiagHermitian, v) -> np.ndarray:
    """Omega^{-1} v; raises :class:`SingularBlockError` for a non-PD block."""
    return omega.solve(v)
