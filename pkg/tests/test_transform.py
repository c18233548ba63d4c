"""Block transform, quantizer, and zigzag scan tests."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import direct_sum_dct, naive_dct8x8, naive_idct8x8
from resacc.transform import (
    DCT_MATRIX,
    ZIGZAG_ORDER,
    dct8x8,
    dct_blocks,
    dequantize,
    idct8x8,
    idct_blocks,
    inverse_zigzag,
    quantize,
    zigzag,
)


def test_dct_matrix_is_orthonormal():
    eye = DCT_MATRIX @ DCT_MATRIX.T
    assert np.allclose(eye, np.eye(8), atol=1e-12)


def test_constant_block_maps_to_pure_dc():
    """A flat block of 16 carries all its energy in the DC coefficient."""
    coeffs = dct8x8(np.full((8, 8), 16.0))
    assert coeffs[0, 0] == pytest.approx(128.0, abs=1e-9)
    ac = coeffs.copy()
    ac[0, 0] = 0.0
    assert np.max(np.abs(ac)) < 1e-9


def test_dc_only_inverts_to_constant_block():
    coeffs = np.zeros((8, 8))
    coeffs[0, 0] = 128.0
    block = idct8x8(coeffs)
    assert np.allclose(block, 16.0, atol=1e-9)


def test_round_trip_on_seeded_blocks():
    rng = np.random.default_rng(7)
    blocks = rng.uniform(-255.0, 255.0, size=(1000, 8, 8))
    back = idct_blocks(dct_blocks(blocks))
    assert np.max(np.abs(back - blocks)) < 1e-9


def test_forward_matches_scalar_loop_oracle():
    rng = np.random.default_rng(11)
    for _ in range(5):
        block = rng.uniform(-255.0, 255.0, size=(8, 8))
        expected = naive_dct8x8(block)
        assert np.max(np.abs(dct8x8(block) - expected)) < 1e-9


def test_inverse_matches_scalar_loop_oracle():
    rng = np.random.default_rng(13)
    for _ in range(5):
        coeffs = rng.uniform(-512.0, 512.0, size=(8, 8))
        expected = naive_idct8x8(coeffs)
        assert np.max(np.abs(idct8x8(coeffs) - expected)) < 1e-9


def test_batched_forward_matches_direct_summation():
    """Separable matrix product agrees with the unfactored basis sum."""
    rng = np.random.default_rng(17)
    blocks = rng.uniform(-255.0, 255.0, size=(64, 8, 8))
    assert np.max(np.abs(dct_blocks(blocks) - direct_sum_dct(blocks))) < 1e-9


def test_batched_agrees_with_single_block_calls():
    rng = np.random.default_rng(19)
    blocks = rng.uniform(-255.0, 255.0, size=(6, 8, 8))
    stacked = dct_blocks(blocks)
    for i in range(6):
        assert np.array_equal(stacked[i], dct8x8(blocks[i]))


def test_energy_is_preserved():
    rng = np.random.default_rng(23)
    for _ in range(20):
        block = rng.uniform(-255.0, 255.0, size=(8, 8))
        spatial = float(np.sum(block * block))
        spectral = float(np.sum(dct8x8(block) ** 2))
        assert abs(spatial - spectral) <= 1e-6 * spatial


def test_block_shape_is_validated():
    with pytest.raises(ValueError, match="8x8"):
        dct8x8(np.zeros((4, 4)))
    with pytest.raises(ValueError, match="8x8"):
        idct8x8(np.zeros((8, 9)))


def test_quantize_rounds_half_away_from_zero():
    coeffs = np.array([[40.0, -12.0], [36.0, -36.0]])
    q = quantize(coeffs, 8)
    assert q.dtype == np.int16
    assert q.tolist() == [[5, -2], [5, -5]]


def test_quantize_unit_scale_keeps_integers():
    rng = np.random.default_rng(29)
    coeffs = rng.integers(-2040, 2041, size=(16, 8, 8)).astype(np.float64)
    assert np.array_equal(quantize(coeffs, 1), coeffs.astype(np.int16))


def test_quantize_saturates_to_int16():
    q = quantize(np.array([1e9, -1e9]), 1)
    assert q.tolist() == [32767, -32768]


def test_quantize_rejects_bad_qscale():
    with pytest.raises(ValueError, match="qscale"):
        quantize(np.zeros((8, 8)), 0)
    with pytest.raises(ValueError, match="qscale"):
        dequantize(np.zeros((8, 8)), -3)


def test_dequantize_example():
    assert dequantize(np.array([5], dtype=np.int16), 8).tolist() == [40.0]


@settings(max_examples=200, deadline=None)
@given(
    value=st.floats(min_value=-2040.0, max_value=2040.0,
                    allow_nan=False, allow_infinity=False),
    qscale=st.sampled_from([1, 2, 4, 8, 16, 31]),
)
def test_quantize_error_bound(value, qscale):
    """Reconstruction error never exceeds half a step (no saturation here)."""
    v = np.array([value])
    err = abs(float(dequantize(quantize(v, qscale), qscale)[0]) - value)
    assert err <= qscale / 2 + 1e-9


def test_zigzag_order_starts_along_the_top_left_diagonals():
    # scan positions (0,0),(0,1),(1,0),(2,0),(1,1),(0,2) as flat indices
    assert ZIGZAG_ORDER[:6].tolist() == [0, 1, 8, 16, 9, 2]


def test_zigzag_is_a_permutation():
    assert sorted(ZIGZAG_ORDER.tolist()) == list(range(64))


def test_zigzag_round_trip():
    rng = np.random.default_rng(31)
    block = rng.integers(-300, 300, size=(8, 8)).astype(np.int16)
    assert np.array_equal(inverse_zigzag(zigzag(block)), block)


def test_zigzag_groups_low_frequencies_first():
    """Index sums along the scan never skip a diagonal going forward."""
    rows, cols = np.divmod(ZIGZAG_ORDER, 8)
    diag = rows + cols
    assert diag[0] == 0 and diag[-1] == 14
    assert np.all(np.diff(diag) >= 0)
    # each diagonal d occupies one contiguous run of the scan
    for d in range(15):
        idx = np.flatnonzero(diag == d)
        assert idx.size == 8 - abs(d - 7)
        assert np.all(np.diff(idx) == 1)


def test_inverse_zigzag_validates_length():
    with pytest.raises(ValueError, match="64"):
        inverse_zigzag(np.zeros(63))
