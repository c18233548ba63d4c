"""Deterministic synthetic clips: a translating sprite over a flat background.

Clips are specified declaratively (ClipSpec) and rendered reproducibly: the
only randomness is per-pixel uniform integer noise drawn from a counter-based
PRNG defined right here, so identical specs produce byte-identical frames on
any platform.

PRNG: the 64-bit finalizer known as splitmix64.  For state x:

    z = x + 0x9E3779B97F4A7C15            (mod 2^64)
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9
    z = (z ^ (z >> 27)) * 0x94D049BB133111EB
    return z ^ (z >> 31)

Pixel (t, i) of a clip uses counter mix(seed) + t * W * H + i, and the noise
value is (mix(counter) mod (2a + 1)) - a for amplitude a.  The modulo bias at
desk-scale amplitudes is far below 2^-50 and accepted for simplicity.

The sprite is a rectangle whose outermost `sprite_feather` pixels ramp
linearly from the background level to the sprite level.  Soft edges keep
consecutive frame differences overlapping at sprite speeds below the feather
width, which is what gives residual streams their high within-event
similarity.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import IngestError

_GAMMA = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)


def splitmix64(x) -> np.ndarray:
    """Vectorized splitmix64 finalizer over uint64 input (wrapping arithmetic)."""
    with np.errstate(over="ignore"):
        z = np.asarray(x, dtype=np.uint64) + _GAMMA
        z = (z ^ (z >> np.uint64(30))) * _MIX1
        z = (z ^ (z >> np.uint64(27))) * _MIX2
        return z ^ (z >> np.uint64(31))


@dataclass(frozen=True)
class ClipSpec:
    """Declarative clip description; see module docstring for rendering rules."""

    width: int = 320
    height: int = 240
    background: int = 96
    sprite_width: int = 48
    sprite_height: int = 32
    sprite_intensity: int = 208
    sprite_feather: int = 6
    noise: int = 0
    seed: int = 0
    # (duration, vx, vy) per event; velocities are integer pixels per frame
    events: tuple[tuple[int, int, int], ...] = field(default_factory=tuple)

    def __post_init__(self):
        if self.width < 1 or self.height < 1:
            raise ValueError(f"bad frame size {self.width}x{self.height}")
        for name in ("background", "sprite_intensity"):
            value = getattr(self, name)
            if not 0 <= value <= 255:
                raise ValueError(f"{name} must be in [0, 255], got {value}")
        if not (1 <= self.sprite_width <= self.width
                and 1 <= self.sprite_height <= self.height):
            raise ValueError("sprite must fit inside the frame")
        if self.sprite_feather < 0:
            raise ValueError("sprite_feather must be >= 0")
        if self.noise < 0:
            raise ValueError("noise amplitude must be >= 0")
        if not 0 <= self.seed < 2 ** 64:
            raise ValueError("seed must be an unsigned 64-bit integer")
        if not self.events:
            raise ValueError("at least one event is required")
        for i, event in enumerate(self.events):
            if len(event) != 3:
                raise ValueError(f"event {i} must be (duration, vx, vy)")
            if event[0] < 1:
                raise ValueError(f"event {i}: duration must be >= 1")

    @property
    def frame_count(self) -> int:
        return sum(duration for duration, _, _ in self.events)


def _axis_profile(length: int, feather: int) -> np.ndarray:
    """Linear 0 -> 1 ramp over the outermost `feather` pixels of an extent."""
    i = np.arange(length, dtype=np.float64)
    if feather == 0:
        return np.ones(length)
    ramp = np.minimum((i + 1.0) / feather, (length - i) / feather)
    return np.clip(ramp, 0.0, 1.0)


def _event_velocities(spec: ClipSpec) -> list[tuple[int, int]]:
    """Per-frame (vx, vy), one entry per frame of the clip."""
    schedule: list[tuple[int, int]] = []
    for duration, vx, vy in spec.events:
        schedule.extend([(vx, vy)] * duration)
    return schedule


def generate(spec: ClipSpec) -> list[np.ndarray]:
    """Render the clip as a list of (height, width) uint8 planes.

    The sprite starts centered.  Between frame t-1 and frame t it moves by
    the velocity of the event frame t belongs to, clamped so it stays fully
    inside the frame.
    """
    alpha = np.outer(_axis_profile(spec.sprite_height, spec.sprite_feather),
                     _axis_profile(spec.sprite_width, spec.sprite_feather))
    sprite = spec.background + (spec.sprite_intensity - spec.background) * alpha
    schedule = _event_velocities(spec)
    max_x = spec.width - spec.sprite_width
    max_y = spec.height - spec.sprite_height
    x, y = max_x // 2, max_y // 2
    npix = spec.width * spec.height
    seed_base = splitmix64(np.array([spec.seed], dtype=np.uint64))[0]
    pixel_index = np.arange(npix, dtype=np.uint64)
    frames: list[np.ndarray] = []
    for t in range(len(schedule)):
        if t > 0:
            vx, vy = schedule[t]
            x = min(max(x + vx, 0), max_x)
            y = min(max(y + vy, 0), max_y)
        base = np.full((spec.height, spec.width), float(spec.background))
        base[y:y + spec.sprite_height, x:x + spec.sprite_width] = sprite
        if spec.noise > 0:
            with np.errstate(over="ignore"):
                counters = seed_base + np.uint64(t * npix) + pixel_index
            span = np.uint64(2 * spec.noise + 1)
            noise = (splitmix64(counters) % span).astype(np.int64) - spec.noise
            base = base + noise.reshape(spec.height, spec.width)
        frames.append(np.clip(np.rint(base), 0, 255).astype(np.uint8))
    return frames


_SPEC_INT_KEYS = ("width", "height", "background", "sprite_width", "sprite_height",
                  "sprite_intensity", "sprite_feather", "noise", "seed")


def save_clip_spec(spec: ClipSpec, path: str) -> None:
    """Write a ClipSpec as a key = value text file."""
    lines = [f"{key} = {getattr(spec, key)}" for key in _SPEC_INT_KEYS]
    for duration, vx, vy in spec.events:
        lines.append(f"event = {duration} {vx} {vy}")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def load_clip_spec(path: str) -> ClipSpec:
    """Parse a key = value ClipSpec file written by save_clip_spec."""
    values: dict[str, int] = {}
    events: list[tuple[int, int, int]] = []
    with open(path) as fh:
        for line_no, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise IngestError(f"{path}: line {line_no}: expected 'key = value'")
            key, _, value = line.partition("=")
            key = key.strip()
            value = value.strip()
            try:
                if key == "event":
                    duration, vx, vy = (int(v) for v in value.split())
                    events.append((duration, vx, vy))
                elif key in _SPEC_INT_KEYS:
                    values[key] = int(value)
                else:
                    raise IngestError(f"{path}: line {line_no}: unknown key {key!r}")
            except ValueError as exc:
                raise IngestError(f"{path}: line {line_no}: {exc}") from exc
    try:
        return ClipSpec(events=tuple(events), **values)
    except ValueError as exc:
        raise IngestError(f"{path}: {exc}") from exc
