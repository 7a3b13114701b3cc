"""Depth maps to pseudo-LiDAR point clouds.

Pinhole back-projection in the left camera frame (x right, y down,
z forward): a pixel (u, v) with depth d maps to

    z = d,   x = d * (u - c_u) / f_u,   y = d * (v - c_v) / f_v.

Every generated point carries reflectance 1 so downstream LiDAR-style
consumers see a complete return. The height filter drops points more than
a threshold above the sensor; the sensor's vertical position is a
parameter (default: the camera origin) because the camera-to-LiDAR offset
depends on the rig calibration.

Interchange formats: ASCII PLY (x y z reflectance per vertex line) and the
headerless binary layout of consecutive little-endian float32 quadruples
that LiDAR detectors consume directly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import DepthMap
from .errors import InvalidRangeError, ParseError

DEFAULT_MAX_HEIGHT = 1.0


@dataclass(frozen=True)
class CameraIntrinsics:
    """Pinhole parameters: focal lengths and principal point, in pixels."""

    f_u: float
    f_v: float
    c_u: float
    c_v: float

    def __post_init__(self):
        if not all(map(math.isfinite, (self.f_u, self.f_v, self.c_u, self.c_v))):
            raise InvalidRangeError("intrinsics must be finite")
        if self.f_u <= 0 or self.f_v <= 0:
            raise InvalidRangeError(
                f"focal lengths must be > 0, got ({self.f_u}, {self.f_v})"
            )


@dataclass(frozen=True)
class PointCloud:
    """Points as an (N, 4) array of (x, y, z, reflectance), camera frame."""

    points: np.ndarray

    def __post_init__(self):
        if self.points.ndim != 2 or self.points.shape[1] != 4:
            raise InvalidRangeError(f"points must be (N, 4), got {self.points.shape}")
        if not np.all(np.isfinite(self.points)):
            raise InvalidRangeError("points must be finite")

    def __len__(self) -> int:
        return self.points.shape[0]


def depth_to_points(depth: DepthMap, intrinsics: CameraIntrinsics) -> PointCloud:
    """Back-project every valid pixel; one point per pixel, reflectance 1.

    Points appear in row-major pixel order.
    """
    vs, us = np.nonzero(depth.validity)
    d = depth.values[vs, us].astype(np.float64)
    x = d * (us - intrinsics.c_u) / intrinsics.f_u
    y = d * (vs - intrinsics.c_v) / intrinsics.f_v
    r = np.ones_like(d)
    return PointCloud(points=np.stack([x, y, d, r], axis=1))


def filter_height(
    pc: PointCloud,
    max_height_above_sensor: float = DEFAULT_MAX_HEIGHT,
    sensor_y: float = 0.0,
) -> PointCloud:
    """Drop points more than max_height_above_sensor above the sensor.

    y points down and the sensor sits at y = sensor_y in the camera frame,
    so a point is removed when y - sensor_y < -max_height_above_sensor.
    Survivor order is preserved.
    """
    if not max_height_above_sensor > 0:
        raise InvalidRangeError(
            f"height threshold must be > 0, got {max_height_above_sensor}"
        )
    keep = pc.points[:, 1] - sensor_y >= -max_height_above_sensor
    return PointCloud(points=pc.points[keep])


def to_ply_ascii(pc: PointCloud) -> bytes:
    """ASCII PLY with x, y, z, reflectance vertex properties (6 decimals)."""
    lines = [
        "ply",
        "format ascii 1.0",
        f"element vertex {len(pc)}",
        "property float x",
        "property float y",
        "property float z",
        "property float reflectance",
        "end_header",
    ]
    for x, y, z, r in pc.points:
        lines.append(f"{x:.6f} {y:.6f} {z:.6f} {r:.6f}")
    return ("\n".join(lines) + "\n").encode("ascii")


def to_kitti_bin(pc: PointCloud) -> bytes:
    """Headerless consecutive little-endian float32 (x, y, z, reflectance)."""
    return np.ascontiguousarray(pc.points, dtype="<f4").tobytes()


def read_kitti_bin(data: bytes) -> PointCloud:
    """Inverse of to_kitti_bin; values come back exactly as stored."""
    if len(data) % 16 != 0:
        raise ParseError(
            f"binary cloud length {len(data)} is not a multiple of 16 bytes",
            source="kitti-bin",
        )
    pts = np.frombuffer(data, dtype="<f4").reshape(-1, 4).astype(np.float64)
    return PointCloud(points=pts)


def export_pointcloud(pc: PointCloud, fmt: str) -> bytes:
    """Serialize in the named format: 'ascii-ply' or 'kitti-bin'."""
    if fmt == "ascii-ply":
        return to_ply_ascii(pc)
    if fmt == "kitti-bin":
        return to_kitti_bin(pc)
    raise InvalidRangeError(f"unknown point cloud format {fmt!r}")
