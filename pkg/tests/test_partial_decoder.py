"""Partial decoder tests: header parsing, RLE, laziness, residual recovery."""

import numpy as np
import pytest

from resacc.codec import (
    HEADER_STRUCT,
    MAGIC,
    EncoderConfig,
    encode,
    encode_clip,
    serialize_stream,
)
from resacc.errors import ParseError
from resacc.partial_decoder import (
    iter_frame_records,
    parse_header,
    parse_stream,
    read_frame_record,
    residual_stream,
    residual_to_plane,
    scan_frame_offsets,
)

RLE_END = bytes([255, 0, 0])  # sentinel pair (255, 0) little-endian


def _header_bytes(width=16, height=16, gop=1, qscale=1, search=0, count=1,
                  magic=MAGIC):
    return HEADER_STRUCT.pack(magic, width, height, gop, qscale, search, count)


def _one_frame_stream(block0_payload=b"", count=1):
    """16x16 single-I-frame stream; block 0 gets the payload, rest are empty."""
    frame = bytes([0, 0, 0])  # frame type I, mv (0,0)
    frame += block0_payload + RLE_END + RLE_END * 3
    return _header_bytes(count=count) + frame * count


def _noise_frames(seed, n, h=32, w=32):
    rng = np.random.default_rng(seed)
    return [rng.integers(0, 256, size=(h, w), dtype=np.uint8) for _ in range(n)]


def test_parse_header_fields():
    header = parse_header(_header_bytes(width=320, height=240, gop=250,
                                        qscale=8, search=7, count=42))
    assert (header.width, header.height) == (320, 240)
    assert (header.gop_size, header.qscale, header.search_range) == (250, 8, 7)
    assert header.frame_count == 42
    assert header.macroblocks == (15, 20)


def test_bad_magic_reports_offset_zero():
    with pytest.raises(ParseError, match="magic") as info:
        parse_header(_header_bytes(magic=b"XRV1"))
    assert info.value.offset == 0


def test_truncated_header_reports_unexpected_end():
    with pytest.raises(ParseError, match="unexpected end") as info:
        parse_header(_header_bytes()[:10])
    assert info.value.offset == 10


@pytest.mark.parametrize("kwargs,offset", [
    ({"width": 17}, 4),
    ({"height": 0}, 4),
    ({"gop": 0}, 8),
    ({"qscale": 0}, 10),
])
def test_invalid_header_fields_carry_offsets(kwargs, offset):
    with pytest.raises(ParseError) as info:
        parse_header(_header_bytes(**kwargs))
    assert info.value.offset == offset


def test_zero_frame_stream_is_empty():
    assert list(residual_stream(_header_bytes(count=0))) == []


def test_all_zero_frame_decodes_to_zero():
    frames = list(residual_stream(_one_frame_stream()))
    assert len(frames) == 1
    assert frames[0].kind == "I"
    assert frames[0].frame_index == 0
    assert frames[0].values.dtype == np.int16
    assert not np.any(frames[0].values)


def test_dc_only_block_decodes_to_a_constant_quadrant():
    """DC 128 at qscale 1 lands as a flat 16 in the block that carries it."""
    dc_pair = bytes([0]) + (128).to_bytes(2, "little", signed=True)
    frame, = residual_stream(_one_frame_stream(block0_payload=dc_pair))
    assert np.all(frame.values[:8, :8] == 16)
    rest = frame.values.copy()
    rest[:8, :8] = 0
    assert not np.any(rest)


def test_unknown_frame_type_is_rejected():
    data = _header_bytes() + bytes([7])
    with pytest.raises(ParseError, match="frame type") as info:
        list(iter_frame_records(data))
    assert info.value.frame_index == 0


def test_rle_run_past_block_end_names_frame_and_macroblock():
    overrun = bytes([200]) + (1).to_bytes(2, "little", signed=True)
    with pytest.raises(ParseError, match="64") as info:
        list(residual_stream(_one_frame_stream(block0_payload=overrun)))
    assert info.value.frame_index == 0
    assert info.value.macroblock_index == 0


def test_missing_sentinel_is_unexpected_end():
    stream = _one_frame_stream()
    with pytest.raises(ParseError, match="unexpected end"):
        list(residual_stream(stream[:-1]))


def test_trailing_bytes_are_rejected_after_the_last_frame():
    stream = _one_frame_stream()
    with pytest.raises(ParseError, match="trailing"):
        list(residual_stream(stream + b"xx"))


def test_truncation_inside_frame_seven_yields_the_first_seven():
    stream = encode(_noise_frames(41, 10), EncoderConfig(qscale=8, search_range=2))
    offsets = scan_frame_offsets(stream)
    cut = stream[:offsets[7] + 5]
    seen = []
    with pytest.raises(ParseError):
        for frame in residual_stream(cut):
            seen.append(frame.frame_index)
    assert seen == [0, 1, 2, 3, 4, 5, 6]


def test_frame_offsets_allow_independent_decoding():
    result = encode_clip(_noise_frames(43, 6), EncoderConfig(qscale=4, search_range=2))
    offsets = scan_frame_offsets(result.stream)
    assert len(offsets) == 6
    assert offsets == sorted(offsets)
    for k in (0, 3, 5):
        record, _ = read_frame_record(result.stream, offsets[k], result.header, k)
        assert record == result.records[k]


def test_parse_stream_round_trips_serialize():
    result = encode_clip(_noise_frames(47, 4, h=32, w=48),
                         EncoderConfig(qscale=2, gop_size=2, search_range=3))
    header, records = parse_stream(result.stream)
    assert serialize_stream(header, records) == result.stream


def test_kind_flags_follow_gop_structure():
    stream = encode(_noise_frames(53, 10), EncoderConfig(gop_size=5, search_range=1))
    kinds = [f.kind for f in residual_stream(stream)]
    assert kinds == ["I", "P", "P", "P", "P", "I", "P", "P", "P", "P"]


def test_qscale_one_recovers_encoder_residuals_within_two():
    result = encode_clip(_noise_frames(59, 5), EncoderConfig(qscale=1, search_range=2))
    decoded = list(residual_stream(result.stream))
    assert len(decoded) == 5
    for frame, retained in zip(decoded, result.residuals):
        diff = np.abs(frame.values.astype(np.int32) - retained.astype(np.int32))
        assert int(diff.max()) <= 2


def test_decoded_values_respect_the_idct_bound():
    stream = encode(_noise_frames(61, 4), EncoderConfig(qscale=16, search_range=1))
    for frame in residual_stream(stream):
        assert int(np.abs(frame.values).max()) <= 255 * 8


def test_residual_stream_is_lazy():
    stream = encode(_noise_frames(67, 8), EncoderConfig(search_range=1))
    it = residual_stream(stream)
    first = next(it)
    assert first.frame_index == 0
    second = next(it)
    assert second.frame_index == 1
    it.close()


def test_residual_export_mapping_endpoints():
    values = np.array([[-600, -255, -1, 0, 1, 255, 600]], dtype=np.int16)
    plane = residual_to_plane(values)
    assert plane.dtype == np.uint8
    assert plane.tolist() == [[0, 0, 127, 127, 128, 255, 255]]
