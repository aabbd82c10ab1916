"""Motion chunks, audio feature chunks, intention signals and chunk algebra.

All containers are immutable after construction (backing arrays are marked
read-only) so they can be shared across threads without locks.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field

import numpy as np

from .skeleton import SkeletonSpec, canonicalize_expmap

# Clamping writes cached values exactly, so any larger deviation in a
# declared overlap region indicates a bug upstream.
OVERLAP_TOLERANCE = 1e-6
ANGLE_EPS = 1e-9

CHUNK_MAGIC = b"MCHK"
CHUNK_VERSION = 1


class OverlapMismatchError(ValueError):
    """Raised when a declared overlap region does not match the cached frames."""


def _freeze(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a, dtype=np.float64)
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class MotionFrame:
    """One pose frame; kept mainly for single-frame validation."""

    values: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "values", _freeze(np.atleast_1d(self.values)))


@dataclass(frozen=True)
class MotionChunk:
    """A fixed-rate block of pose frames starting at ``start_index`` in the stream."""

    frames: np.ndarray  # (n, frame_width)
    start_index: int
    skeleton: SkeletonSpec

    def __post_init__(self):
        arr = np.atleast_2d(np.asarray(self.frames, dtype=np.float64))
        object.__setattr__(self, "frames", _freeze(arr))

    def __len__(self) -> int:
        return self.frames.shape[0]

    @property
    def width(self) -> int:
        return self.frames.shape[1]

    @property
    def end_index(self) -> int:
        return self.start_index + len(self)

    def canonicalized(self) -> "MotionChunk":
        """Return a copy with every exponential-map block wrapped to angle <= pi."""
        return MotionChunk(
            canonicalize_expmap(self.frames, self.skeleton.rot_width),
            self.start_index,
            self.skeleton,
        )


@dataclass(frozen=True)
class AudioFeatureChunk:
    """Per-frame audio features for one stream; ``source`` is 'user' or 'agent'."""

    features: np.ndarray  # (n, F)
    source: str

    def __post_init__(self):
        if self.source not in ("user", "agent"):
            raise ValueError(f"source must be 'user' or 'agent', got {self.source!r}")
        arr = np.atleast_2d(np.asarray(self.features, dtype=np.float64))
        if not np.isfinite(arr).all():
            raise ValueError("audio features must be finite")
        object.__setattr__(self, "features", _freeze(arr))

    def __len__(self) -> int:
        return self.features.shape[0]

    @property
    def dim(self) -> int:
        return self.features.shape[1]


@dataclass(frozen=True)
class IntentionSignal:
    """A 'body part + action' descriptor with the gate weight applied on injection.

    ``gate == 0`` together with empty text encodes "no intention".
    """

    body_part: str = ""
    action: str = ""
    raw_text: str = ""
    gate: float = 0.0
    issued_at: int = 0

    def __post_init__(self):
        if not 0.0 <= self.gate <= 1.0:
            raise ValueError(f"gate must be in [0, 1], got {self.gate}")

    @property
    def empty(self) -> bool:
        return self.raw_text == ""

    @classmethod
    def parse(cls, raw_text: str, vocabulary: set[str] | list[str],
              gate: float = 1.0, issued_at: int = 0) -> "IntentionSignal":
        """Parse ``"<body part> <action>"`` against the configured vocabulary."""
        if raw_text.strip() == "":
            return cls(gate=0.0, issued_at=issued_at)
        tokens = raw_text.split()
        if len(tokens) != 2:
            raise ValueError(f"intention must be 'body_part action', got {raw_text!r}")
        vocab = set(vocabulary)
        for tok in tokens:
            if tok not in vocab:
                raise ValueError(f"unknown intention token {tok!r}")
        return cls(body_part=tokens[0], action=tokens[1], raw_text=raw_text,
                   gate=gate, issued_at=issued_at)


EMPTY_INTENTION = IntentionSignal()


# ---------------------------------------------------------------------------
# validation

@dataclass
class ValidationReport:
    violations: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def add(self, msg: str):
        self.violations.append(msg)

    def __str__(self) -> str:
        return "ok" if self.ok else "; ".join(self.violations)


def validate_chunk(chunk: MotionChunk, spec: SkeletonSpec) -> ValidationReport:
    """Check a chunk against a skeleton spec; the report lists every violation."""
    report = ValidationReport()
    frames = chunk.frames
    if frames.shape[1] != spec.frame_width:
        report.add(f"frame width {frames.shape[1]} != expected {spec.frame_width} "
                   f"(J={spec.joint_count})")
        return report
    bad = ~np.isfinite(frames)
    if bad.any():
        for t, c in zip(*np.nonzero(bad)):
            report.add(f"non-finite value at frame {int(t)}, column {int(c)}")
    else:
        rots = frames[:, :spec.rot_width].reshape(len(chunk), -1, 3)
        angles = np.linalg.norm(rots, axis=-1)
        over = angles > np.pi + ANGLE_EPS
        for t, j in zip(*np.nonzero(over)):
            report.add(f"exponential map angle {angles[t, j]:.6f} > pi "
                       f"at frame {int(t)}, joint {int(j)}")
    return report


# ---------------------------------------------------------------------------
# chunk algebra

def tail(chunk: MotionChunk, length: int) -> MotionChunk:
    """Last ``length`` frames of ``chunk`` with the stream index advanced."""
    n = len(chunk)
    if length > n:
        raise ValueError(f"tail of {length} frames requested from chunk of {n}")
    return MotionChunk(chunk.frames[n - length:], chunk.start_index + n - length,
                       chunk.skeleton)


def concat_with_overlap(prev: MotionChunk, nxt: MotionChunk, overlap: int) -> MotionChunk:
    """Join two chunks whose ``overlap`` boundary frames were clamped to agree.

    The duplicated frames are emitted once.  A deviation beyond
    OVERLAP_TOLERANCE in the overlap region is rejected, naming the worst
    coordinate: clamped generation writes cached values exactly.
    """
    if overlap >= len(nxt):
        raise ValueError(f"overlap {overlap} must be < len(next) = {len(nxt)}")
    if prev.width != nxt.width:
        raise ValueError("chunk widths differ")
    if nxt.start_index != prev.end_index - overlap:
        raise ValueError(
            f"stream indices not contiguous: prev ends at {prev.end_index}, "
            f"next starts at {nxt.start_index} with overlap {overlap}")
    if overlap > 0:
        dev = np.abs(prev.frames[len(prev) - overlap:] - nxt.frames[:overlap])
        worst = np.unravel_index(np.argmax(dev), dev.shape)
        if dev[worst] > OVERLAP_TOLERANCE:
            raise OverlapMismatchError(
                f"overlap deviates by {dev[worst]:.3e} at overlap frame "
                f"{int(worst[0])}, column {int(worst[1])}")
    joined = np.concatenate([prev.frames, nxt.frames[overlap:]], axis=0)
    return MotionChunk(joined, prev.start_index, prev.skeleton)


def frame_delta_stats(chunk: MotionChunk) -> dict:
    """Frame-to-frame absolute delta statistics, per coordinate and aggregate."""
    if len(chunk) < 2:
        raise ValueError("need at least 2 frames for delta statistics")
    deltas = np.abs(np.diff(chunk.frames, axis=0))
    return {
        "per_coordinate": {
            "mean": deltas.mean(axis=0),
            "max": deltas.max(axis=0),
            "p99": np.percentile(deltas, 99.0, axis=0),
        },
        "aggregate": {
            "mean": float(deltas.mean()),
            "max": float(deltas.max()),
            "p99": float(np.percentile(deltas, 99.0)),
        },
    }


# ---------------------------------------------------------------------------
# serialization
#
# Text form: newline-delimited records, one frame per line:
#   {"i": <global stream frame index>, "v": [<frame_width floats>]}
# Binary columnar form (little-endian):
#   magic "MCHK" | u32 version | u64 n | u64 width | i64 start_index | f64 fps
#   then width columns, each n float64 values (column-major dump).

def chunk_to_ndjson(chunk: MotionChunk) -> str:
    lines = []
    for t in range(len(chunk)):
        rec = {"i": chunk.start_index + t, "v": chunk.frames[t].tolist()}
        lines.append(json.dumps(rec, separators=(",", ":")))
    return "\n".join(lines) + "\n"


def chunk_from_ndjson(text: str, skeleton: SkeletonSpec) -> MotionChunk:
    rows, start = [], None
    for line in text.splitlines():
        if not line.strip():
            continue
        rec = json.loads(line)
        if start is None:
            start = int(rec["i"])
        rows.append(rec["v"])
    if start is None:
        raise ValueError("no frame records found")
    return MotionChunk(np.asarray(rows, dtype=np.float64), start, skeleton)


_BIN_HEADER = struct.Struct("<4sIQQqd")


def chunk_to_binary(chunk: MotionChunk) -> bytes:
    n, width = chunk.frames.shape
    header = _BIN_HEADER.pack(CHUNK_MAGIC, CHUNK_VERSION, n, width,
                              chunk.start_index, chunk.skeleton.fps)
    body = np.asfortranarray(chunk.frames).tobytes(order="F")
    return header + body


def chunk_from_binary(blob: bytes, skeleton: SkeletonSpec) -> MotionChunk:
    magic, version, n, width, start, fps = _BIN_HEADER.unpack_from(blob, 0)
    if magic != CHUNK_MAGIC:
        raise ValueError(f"bad magic {magic!r}")
    if version != CHUNK_VERSION:
        raise ValueError(f"unsupported chunk version {version}")
    if abs(fps - skeleton.fps) > 1e-9:
        raise ValueError(f"fps mismatch: file {fps}, skeleton {skeleton.fps}")
    data = np.frombuffer(blob, dtype="<f8", offset=_BIN_HEADER.size,
                         count=n * width)
    frames = data.reshape((n, width), order="F")
    return MotionChunk(frames, start, skeleton)
