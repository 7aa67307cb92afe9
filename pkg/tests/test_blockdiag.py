import numpy as np
import pytest

from gpi_isac import BlockDiagHermitian, SingularBlockError, blockdiag_solve
from conftest import random_unit


def random_pd_blocks(rng, nb, n):
    x = rng.standard_normal((nb, n, n)) + 1j * rng.standard_normal((nb, n, n))
    return x @ x.conj().transpose(0, 2, 1) + n * np.eye(n)


def test_identity_solve(rng):
    v = random_unit(rng, 12)
    np.testing.assert_allclose(blockdiag_solve(BlockDiagHermitian.identity(3, 4), v), v)
    np.testing.assert_allclose(blockdiag_solve(BlockDiagHermitian.identity(3, 4) * 2.0, v), v / 2)


def test_solve_matches_dense(rng):
    for _ in range(10):
        M = BlockDiagHermitian(random_pd_blocks(rng, 5, 4))
        v = random_unit(rng, 20)
        x = M.solve(v)
        ref = np.linalg.solve(M.to_dense(), v)
        assert np.linalg.norm(x - ref) <= 1e-10 * np.linalg.norm(ref)


def test_matvec_quad_match_dense(rng):
    M = BlockDiagHermitian(random_pd_blocks(rng, 3, 5))
    v = random_unit(rng, 15)
    dense = M.to_dense()
    np.testing.assert_allclose(M @ v, dense @ v, atol=1e-12)
    assert M.quad(v) == pytest.approx(np.vdot(v, dense @ v).real, rel=1e-12)


def test_singular_block_is_named(rng):
    blocks = random_pd_blocks(rng, 4, 3)
    blocks[2] = np.diag([1.0, 0.0, -1.0])
    with pytest.raises(SingularBlockError) as err:
        BlockDiagHermitian(blocks).solve(np.ones(12))
    assert err.value.index == 2
    assert "block 2" in str(err.value)


def test_from_shared_with_override():
    shared = np.eye(2) * 3
    M = BlockDiagHermitian.from_shared(shared, 3, {1: np.eye(2)})
    np.testing.assert_allclose(M.blocks[0], shared)
    np.testing.assert_allclose(M.blocks[1], np.eye(2))
    assert M.shape == (6, 6) and M.n_blocks == 3 and M.block_size == 2
    assert M.hermitian_error() == 0.0


def test_arithmetic(rng):
    A = BlockDiagHermitian(random_pd_blocks(rng, 2, 3))
    B = BlockDiagHermitian(random_pd_blocks(rng, 2, 3))
    np.testing.assert_allclose((A + 2.0 * B).to_dense(), A.to_dense() + 2 * B.to_dense())


def test_bad_shape():
    with pytest.raises(ValueError):
        BlockDiagHermitian(np.zeros((2, 3, 4)))
