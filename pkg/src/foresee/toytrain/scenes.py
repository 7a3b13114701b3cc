"""Synthetic road-like scenes with controllable foreground statistics.

A scene is a ground-plane depth ramp (near at the bottom of the image,
receding toward a horizon) topped with piecewise-constant building bands,
plus a handful of near-constant-depth rectangular objects. Objects mimic
the foreground statistics of road scenes: they sit in the near field,
cluster into blocks, and create strong depth edges against the backdrop.

The rendered input image is a single shading channel derived from depth,
so depth is recoverable from appearance in principle. Foreground pixels
use a different affine shading law than background (objects are brighter
and their shading varies less with depth) plus a small per-object checker
texture. The two laws conflict: the same pixel value implies different
depths depending on region, which is what makes foreground/background
weighting a real trade-off for a small model.

Everything is driven by the explicit SplitMix64 stream: one substream per
(seed, index), so scene i is reproducible in isolation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..core import DepthMap, ForegroundMask
from ..errors import InvalidRangeError
from .rng import SplitMix64, substream


@dataclass(frozen=True)
class SceneParams:
    height: int = 64
    width: int = 96
    horizon_frac: float = 0.35  # rows above this fraction are buildings
    ground_near: float = 3.0  # depth at the bottom row, meters
    ground_far: float = 55.0  # depth at the horizon row, meters
    band_depth_range: tuple[float, float] = (15.0, 70.0)
    object_count_range: tuple[int, int] = (2, 5)
    object_depth_range: tuple[float, float] = (3.0, 20.0)
    object_width_range: tuple[int, int] = (10, 26)
    object_height_range: tuple[int, int] = (8, 20)
    noise_amplitude: float = 0.05  # meters, uniform, added to the final depth
    fg_fraction_range: tuple[float, float] = (0.02, 0.25)
    # appearance: background value = shade(depth); foreground value =
    # fg_gain * shade(depth) + fg_bias + texture
    shade_d_lo: float = 1.0
    shade_d_hi: float = 80.0
    fg_gain: float = 0.5
    fg_bias: float = 0.45
    texture_amplitude: float = 0.03
    max_attempts: int = 100
    seed: int = 0

    def __post_init__(self):
        if self.height < 8 or self.width < 8:
            raise InvalidRangeError("scene must be at least 8x8")
        if not 0 < self.ground_near < self.ground_far:
            raise InvalidRangeError("need 0 < ground_near < ground_far")
        lo, hi = self.object_count_range
        if lo < 0 or hi < lo:
            raise InvalidRangeError("bad object count range")
        if not 0 < self.shade_d_lo < self.shade_d_hi:
            raise InvalidRangeError("bad shading depth range")


def shade(depth: np.ndarray, params: SceneParams) -> np.ndarray:
    """Normalized brightness of background at a given depth (near = bright)."""
    d = np.clip(depth, params.shade_d_lo, params.shade_d_hi)
    lo, hi = np.log(params.shade_d_lo), np.log(params.shade_d_hi)
    return (hi - np.log(d)) / (hi - lo)


def _background_depth(params: SceneParams, rng: SplitMix64) -> np.ndarray:
    h, w = params.height, params.width
    horizon = max(1, int(round(params.horizon_frac * h)))
    depth = np.empty((h, w), dtype=np.float64)

    # ground plane: log-linear ramp from far (horizon) to near (bottom row)
    rows = np.arange(horizon, h)
    t = (rows - horizon) / max(h - 1 - horizon, 1)
    ln_d = np.log(params.ground_far) + t * (np.log(params.ground_near) - np.log(params.ground_far))
    depth[horizon:, :] = np.exp(ln_d)[:, None]

    # buildings: vertical bands of constant depth above the horizon
    u0 = 0
    while u0 < w:
        band_w = rng.randint(max(4, w // 8), max(5, w // 3) + 1)
        d_band = rng.log_uniform(*params.band_depth_range)
        depth[:horizon, u0:min(w, u0 + band_w)] = d_band
        u0 += band_w
    return depth


def generate_scene(
    params: SceneParams, index: int
) -> tuple[np.ndarray, DepthMap, ForegroundMask]:
    """Render scene `index` of the stream: (image, ground truth, fg mask).

    Deterministic per (params.seed, index). Resamples object layouts until
    the foreground fraction lands inside params.fg_fraction_range (not
    enforced when the requested object count is zero).
    """
    rng = substream(params.seed, index)
    h, w = params.height, params.width
    count_lo, count_hi = params.object_count_range
    constrain_fraction = count_hi > 0

    for _ in range(params.max_attempts):
        depth = _background_depth(params, rng)
        mask = np.zeros((h, w), dtype=bool)
        object_id = np.zeros((h, w), dtype=np.int64)

        count = rng.randint(count_lo, count_hi + 1) if count_hi > count_lo else count_lo
        for j in range(count):
            ow = rng.randint(*params.object_width_range)
            oh = rng.randint(*params.object_height_range)
            ow, oh = min(ow, w), min(oh, h)
            u0 = rng.randint(0, w - ow + 1)
            v0 = rng.randint(0, h - oh + 1)
            d_obj = rng.log_uniform(*params.object_depth_range)
            depth[v0:v0 + oh, u0:u0 + ow] = d_obj
            mask[v0:v0 + oh, u0:u0 + ow] = True
            object_id[v0:v0 + oh, u0:u0 + ow] = j + 1

        fraction = mask.mean()
        lo, hi = params.fg_fraction_range
        if constrain_fraction and not lo <= fraction <= hi:
            continue

        if params.noise_amplitude > 0:
            noise = rng.uniforms(h * w, -params.noise_amplitude, params.noise_amplitude)
            depth = depth + noise.reshape(h, w)
        depth = np.maximum(depth, 1e-3)

        s = shade(depth, params)
        vv, uu = np.mgrid[0:h, 0:w]
        checker = params.texture_amplitude * (((uu + vv + object_id) % 2) * 2.0 - 1.0)
        tint = params.texture_amplitude * ((object_id % 3) - 1.0)
        image = np.where(mask, params.fg_gain * s + params.fg_bias + checker + tint, s)

        gt = DepthMap(values=depth, validity=np.ones((h, w), dtype=bool))
        return image, gt, ForegroundMask(flags=mask)

    raise InvalidRangeError(
        f"could not hit foreground fraction {params.fg_fraction_range} "
        f"in {params.max_attempts} attempts (scene {index})"
    )
