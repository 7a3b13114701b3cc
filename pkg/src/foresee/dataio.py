"""File formats: depth PNGs, object labels, calibration text, logit volumes.

Depth maps travel as 16-bit single-channel PNGs holding depth * 256 with
raw 0 meaning "no measurement" (the usual sparse-ground-truth encoding).
Object labels and calibration files follow the KITTI text layouts: labels
are 15+ whitespace-separated fields per object with the 2D box in fields
5-8, calibration files carry named 3x4 row-major projection matrices.

Logit volumes get a small dedicated binary container (magic "FSEE",
version, H/W/C header, float32 little-endian payload) so decoder outputs
can be exchanged between tools and merged offline.

Parsers reject malformed input with located errors rather than guessing.
"""

from __future__ import annotations

import io
import struct
from dataclasses import dataclass

import numpy as np
from PIL import Image, UnidentifiedImageError

from .core import DepthMap, ForegroundMask, LogitVolume
from .errors import InvalidRangeError, ParseError
from .pointcloud import CameraIntrinsics

DEPTH_SCALE = 256.0
LOGIT_MAGIC = b"FSEE"
LOGIT_VERSION = 1
_LOGIT_HEADER = struct.Struct("<4sIIII")

# classes skipped by default; everything else counts as foreground
IGNORED_CLASSES = frozenset({"DontCare"})


@dataclass(frozen=True)
class Box2D:
    """Axis-aligned 2D box in pixel coordinates, half-open at rasterization."""

    class_name: str
    left: float
    top: float
    right: float
    bottom: float

    def __post_init__(self):
        if not (self.left < self.right and self.top < self.bottom):
            raise InvalidRangeError(
                f"degenerate box ({self.left}, {self.top}, {self.right}, {self.bottom})"
            )


def read_depth_image(data: bytes) -> DepthMap:
    """Decode a 16-bit grayscale PNG into meters (raw / 256, raw 0 invalid)."""
    try:
        img = Image.open(io.BytesIO(data))
        img.load()
    except (UnidentifiedImageError, OSError) as exc:
        raise ParseError(f"not a decodable image: {exc}", source="depth-png") from exc
    if img.mode not in ("I", "I;16", "I;16B", "I;16L"):
        raise ParseError(
            f"expected a 16-bit single-channel image, got mode {img.mode!r}",
            source="depth-png",
        )
    raw = np.asarray(img, dtype=np.int64)
    if raw.ndim != 2:
        raise ParseError("expected a single-channel image", source="depth-png")
    if raw.min() < 0 or raw.max() > 65535:
        raise ParseError("pixel values outside the 16-bit range", source="depth-png")
    validity = raw > 0
    values = raw.astype(np.float64) / DEPTH_SCALE
    values[~validity] = 0.0
    return DepthMap(values=values, validity=validity)


def write_depth_image(depth: DepthMap) -> bytes:
    """Encode to the 16-bit PNG convention, rounding to the nearest raw value."""
    raw = np.rint(depth.values * DEPTH_SCALE)
    raw = np.clip(raw, 0, 65535).astype(np.uint16)
    raw[~depth.validity] = 0
    img = Image.fromarray(raw)
    buf = io.BytesIO()
    img.save(buf, format="PNG")
    return buf.getvalue()


def parse_labels(
    text: str,
    classes: frozenset[str] | set[str] | None = None,
    source: str = "labels",
) -> list[Box2D]:
    """One Box2D per labeled object line.

    DontCare lines are always skipped; pass an explicit class set to keep
    only those classes (default: every non-DontCare class is foreground).
    """
    boxes: list[Box2D] = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        fields = line.split()
        if len(fields) < 15:
            raise ParseError(
                f"expected at least 15 fields, got {len(fields)}",
                source=source, line=lineno,
            )
        name = fields[0]
        if name in IGNORED_CLASSES:
            continue
        if classes is not None and name not in classes:
            continue
        try:
            left, top, right, bottom = (float(x) for x in fields[4:8])
            box = Box2D(class_name=name, left=left, top=top, right=right, bottom=bottom)
        except (ValueError, InvalidRangeError) as exc:
            raise ParseError(f"bad 2D box: {exc}", source=source, line=lineno) from exc
        boxes.append(box)
    return boxes


def parse_calib(text: str, key: str = "P2", source: str = "calib") -> CameraIntrinsics:
    """Extract pinhole intrinsics from a named 3x4 projection row.

    Row-major layout: f_u = P[0][0], c_u = P[0][2], f_v = P[1][1],
    c_v = P[1][2].
    """
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        head, sep, rest = line.partition(":")
        if not sep or head.strip() != key:
            continue
        parts = rest.split()
        if len(parts) != 12:
            raise ParseError(
                f"projection {key} must have 12 entries, got {len(parts)}",
                source=source, line=lineno,
            )
        try:
            p = [float(x) for x in parts]
        except ValueError as exc:
            raise ParseError(f"non-numeric projection entry: {exc}",
                             source=source, line=lineno) from exc
        try:
            return CameraIntrinsics(f_u=p[0], f_v=p[5], c_u=p[2], c_v=p[6])
        except InvalidRangeError as exc:
            raise ParseError(f"bad intrinsics: {exc}", source=source, line=lineno) from exc
    raise ParseError(f"projection key {key!r} not found", source=source)


def rasterize_mask(boxes: list[Box2D], height: int, width: int) -> ForegroundMask:
    """Union of boxes: pixel (u, v) is foreground iff left <= u < right and
    top <= v < bottom for some box. Boxes are clamped to the image bounds."""
    if height <= 0 or width <= 0:
        raise InvalidRangeError(f"image must be non-empty, got {height}x{width}")
    flags = np.zeros((height, width), dtype=bool)
    for box in boxes:
        u0 = max(0, int(np.ceil(box.left)))
        u1 = min(width, int(np.ceil(box.right)))
        v0 = max(0, int(np.ceil(box.top)))
        v1 = min(height, int(np.ceil(box.bottom)))
        if u1 > u0 and v1 > v0:
            flags[v0:v1, u0:u1] = True
    return ForegroundMask(flags=flags)


def write_logits(volume: LogitVolume) -> bytes:
    """Serialize to the binary container (float32 payload, row-major)."""
    header = _LOGIT_HEADER.pack(
        LOGIT_MAGIC, LOGIT_VERSION, volume.height, volume.width, volume.channels
    )
    return header + np.ascontiguousarray(volume.scores, dtype="<f4").tobytes()


def read_logits(data: bytes) -> LogitVolume:
    """Parse the binary container; bit-exact inverse of write_logits."""
    if len(data) < _LOGIT_HEADER.size:
        raise ParseError(
            f"file too short for header ({len(data)} bytes)", source="logits"
        )
    magic, version, h, w, c = _LOGIT_HEADER.unpack_from(data)
    if magic != LOGIT_MAGIC:
        raise ParseError(f"bad magic {magic!r}", source="logits")
    if version != LOGIT_VERSION:
        raise ParseError(f"unsupported version {version}", source="logits")
    expected = _LOGIT_HEADER.size + 4 * h * w * c
    if len(data) != expected:
        raise ParseError(
            f"payload truncated or padded: expected {expected} bytes, got {len(data)}",
            source="logits",
        )
    scores = np.frombuffer(data, dtype="<f4", offset=_LOGIT_HEADER.size)
    scores = scores.reshape(h, w, c).astype(np.float64)
    if not np.all(np.isfinite(scores)):
        raise ParseError("payload contains non-finite values", source="logits")
    return LogitVolume(scores=scores)


def read_index(text: str) -> list[str]:
    """Sample ids, one per line, blank lines ignored."""
    return [line.strip() for line in text.splitlines() if line.strip()]
