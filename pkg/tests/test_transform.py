import numpy as np
import pytest

from lfcodec.transform import (
    DCT_MATRIX,
    ZIGZAG,
    dequant_itransform,
    forward_dct,
    inverse_dct,
    step_size,
    transform_quant,
)


def _float_dct(block):
    n = 8
    k = np.arange(n)
    c = np.array([[np.sqrt((1 if i == 0 else 2) / n) * np.cos(np.pi * (2 * j + 1) * i / (2 * n)) for j in k] for i in k])
    return c @ block @ c.T


def test_basis_is_near_orthonormal():
    m = DCT_MATRIX.astype(float) / 2**14
    assert np.allclose(m @ m.T, np.eye(8), atol=1e-3)


def test_forward_dct_tracks_float_reference(rng):
    for _ in range(50):
        blk = rng.integers(-255, 256, (8, 8))
        assert np.allclose(forward_dct(blk) / 8.0, _float_dct(blk.astype(float)), atol=0.2)


def test_dct_round_trip_without_quantisation(rng):
    for _ in range(50):
        blk = rng.integers(-255, 256, (8, 8))
        assert np.abs(inverse_dct(forward_dct(blk)) - blk).max() <= 1


def test_step_doubles_every_six_qp():
    assert step_size(4) == 1.0
    assert step_size(10) == pytest.approx(2.0)
    assert step_size(34) == pytest.approx(32.0)


@pytest.mark.parametrize("qp", [0, 12, 24, 30, 36, 42, 51])
def test_reconstruction_error_scales_with_step(rng, qp):
    # quantisation error per coefficient <= step/2; through an orthonormal 8x8 inverse
    # a pixel collects at most 8 * step / 2 = 4 * step, plus integer rounding
    bound = 4 * step_size(qp) + 2
    for _ in range(40):
        blk = rng.integers(-255, 256, (8, 8))
        rec = dequant_itransform(transform_quant(blk, qp), qp)
        assert np.abs(rec - blk).max() <= bound


def test_flat_block_has_only_dc():
    lv = transform_quant(np.full((8, 8), 40), 24)
    assert lv[0, 0] != 0 and np.count_nonzero(lv) == 1


def test_batched_transform_equals_single(rng):
    stack = rng.integers(-255, 256, (3, 2, 8, 8))
    batched = transform_quant(stack, 30)
    for idx in np.ndindex(3, 2):
        assert np.array_equal(batched[idx], transform_quant(stack[idx], 30))
    with pytest.raises(ValueError):
        transform_quant(np.zeros((4, 4)), 30)
    with pytest.raises(ValueError):
        transform_quant(np.zeros((8, 8)), 52)


def test_zigzag_is_a_permutation_starting_at_dc():
    assert sorted(ZIGZAG) == list(range(64))
    assert list(ZIGZAG[:6]) == [0, 1, 8, 16, 9, 2]
