"""Synthetic clip generator tests."""

import numpy as np
import pytest

from resacc.errors import IngestError
from resacc.synthgen import (
    ClipSpec,
    generate,
    load_clip_spec,
    save_clip_spec,
    splitmix64,
)

MASK = (1 << 64) - 1


def _splitmix64_scalar(x):
    z = (x + 0x9E3779B97F4A7C15) & MASK
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK
    return z ^ (z >> 31)


def test_splitmix64_known_value():
    # first output of the reference sequence seeded with 0
    assert int(splitmix64(np.uint64(0))) == 0xE220A8397B1DCDAF


def test_splitmix64_matches_scalar_reimplementation():
    inputs = [0, 1, 42, 2**63, MASK, 0xDEADBEEF]
    got = splitmix64(np.array(inputs, dtype=np.uint64))
    assert [int(v) for v in got] == [_splitmix64_scalar(v) for v in inputs]


def _spec(**kwargs):
    defaults = dict(width=64, height=48, sprite_width=16, sprite_height=16,
                    sprite_feather=0, noise=0, seed=0, events=((3, 0, 0),))
    defaults.update(kwargs)
    return ClipSpec(**defaults)


def test_frame_count_sums_event_durations():
    spec = _spec(events=((3, 1, 0), (5, 0, 1), (2, -1, 0)))
    assert spec.frame_count == 10
    frames = generate(spec)
    assert len(frames) == 10
    assert frames[0].shape == (48, 64)
    assert frames[0].dtype == np.uint8


def test_generation_is_deterministic():
    spec = _spec(noise=3, seed=99, events=((4, 2, 1),))
    first = generate(spec)
    second = generate(spec)
    for a, b in zip(first, second):
        assert np.array_equal(a, b)


def test_static_noiseless_clip_repeats_one_frame():
    frames = generate(_spec(events=((5, 0, 0),)))
    for frame in frames[1:]:
        assert np.array_equal(frame, frames[0])


def test_single_event_motion_touches_only_the_vertical_edges():
    """Moving right by 2 changes two 2-wide strips at the sprite sides."""
    spec = _spec(width=320, height=240, sprite_width=48, sprite_height=32,
                 events=((2, 2, 0),))
    frames = generate(spec)
    x0, y0 = (320 - 48) // 2, (240 - 32) // 2
    diff = frames[1].astype(np.int16) - frames[0].astype(np.int16)
    changed_cols = set(np.unique(np.nonzero(diff)[1]).tolist())
    assert changed_cols == {x0, x0 + 1, x0 + 48, x0 + 49}
    changed_rows = np.unique(np.nonzero(diff)[0])
    assert changed_rows.min() == y0 and changed_rows.max() == y0 + 31
    assert np.all(diff[y0:y0 + 32, x0:x0 + 2] == -112)   # vacated pixels
    assert np.all(diff[y0:y0 + 32, x0 + 48:x0 + 50] == 112)  # covered pixels


def test_sprite_clamps_at_the_frame_border():
    spec = _spec(events=((4, 200, 200),))
    frames = generate(spec)
    # one step pins the sprite at the bottom-right corner; it stays there
    assert frames[1][47, 63] == 208
    for frame in frames[2:]:
        assert np.array_equal(frame, frames[1])


def test_noise_stays_within_amplitude():
    spec = _spec(noise=5, seed=7, events=((3, 0, 0),))
    clean = generate(_spec(events=((3, 0, 0),)))
    noisy = generate(spec)
    for c, n in zip(clean, noisy):
        delta = n.astype(np.int16) - c.astype(np.int16)
        assert int(np.abs(delta).max()) <= 5
        assert np.any(delta != 0)


def test_different_seeds_give_different_noise():
    a = generate(_spec(noise=3, seed=1))
    b = generate(_spec(noise=3, seed=2))
    assert not np.array_equal(a[0], b[0])


def test_feather_ramps_from_background_to_sprite_level():
    spec = _spec(width=320, height=240, sprite_width=48, sprite_height=32,
                 sprite_feather=4, events=((1, 0, 0),))
    frame = generate(spec)[0]
    x0, y0 = (320 - 48) // 2, (240 - 32) // 2
    # corner pixel carries the product of two quarter ramps: 96 + 112/16
    assert frame[y0, x0] == 103
    assert frame[y0 + 16, x0 + 24] == 208  # interior is at full level
    assert frame[0, 0] == 96


@pytest.mark.parametrize("kwargs", [
    {"events": ()},
    {"events": ((0, 1, 0),)},
    {"sprite_width": 65},
    {"background": 300},
    {"noise": -1},
    {"seed": -1},
    {"sprite_feather": -2},
])
def test_spec_validation(kwargs):
    with pytest.raises(ValueError):
        _spec(**kwargs)


def test_clip_spec_file_round_trip(tmp_path):
    spec = _spec(noise=2, seed=1234, events=((3, 1, 0), (4, 0, -2)))
    path = tmp_path / "clip.spec"
    save_clip_spec(spec, path)
    assert load_clip_spec(path) == spec


def test_clip_spec_loader_skips_comments(tmp_path):
    path = tmp_path / "clip.spec"
    path.write_text("# a comment\nwidth = 64\nheight = 48\n\n"
                    "sprite_width = 16\nsprite_height = 16\n"
                    "event = 2 1 0  # trailing comment\n")
    spec = load_clip_spec(path)
    assert spec.width == 64 and spec.events == ((2, 1, 0),)


@pytest.mark.parametrize("text,match", [
    ("width 64\n", "key = value"),
    ("widht = 64\nevent = 1 0 0\n", "unknown key"),
    ("width = abc\nevent = 1 0 0\n", "line 1"),
    ("event = 1 2\n", "line 1"),
    ("width = 64\n", "event"),
])
def test_clip_spec_loader_errors(tmp_path, text, match):
    path = tmp_path / "clip.spec"
    path.write_text(text)
    with pytest.raises(IngestError, match=match):
        load_clip_spec(path)
