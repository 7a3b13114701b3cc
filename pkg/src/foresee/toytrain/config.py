"""Plain-text key=value experiment configs.

One `key = value` pair per line, `#` starts a comment. Unknown keys are
rejected so typos fail loudly. The same format is written back next to
experiment results, so a run can be reproduced from its output directory
alone.
"""

from __future__ import annotations

from dataclasses import replace

from ..errors import ParseError
from .experiments import ToyConfig
from .scenes import SceneParams

# key -> (target, field, type); target "scene" nests into ToyConfig.scene
_SCHEMA: dict[str, tuple[str, str, type]] = {
    "height": ("scene", "height", int),
    "width": ("scene", "width", int),
    "horizon_frac": ("scene", "horizon_frac", float),
    "ground_near": ("scene", "ground_near", float),
    "ground_far": ("scene", "ground_far", float),
    "object_count_min": ("scene", "object_count_range", int),
    "object_count_max": ("scene", "object_count_range", int),
    "object_depth_min": ("scene", "object_depth_range", float),
    "object_depth_max": ("scene", "object_depth_range", float),
    "noise_amplitude": ("scene", "noise_amplitude", float),
    "seed": ("scene", "seed", int),
    "num_bins": ("config", "num_bins", int),
    "d_min": ("config", "d_min", float),
    "d_max": ("config", "d_max", float),
    "hidden": ("config", "hidden", int),
    "kernel": ("config", "kernel", int),
    "steps": ("config", "steps", int),
    "lr": ("config", "lr", float),
    "lr_decay_step": ("config", "lr_decay_step", int),
    "lr_decay": ("config", "lr_decay", float),
    "train_scenes": ("config", "train_scenes", int),
    "eval_scenes": ("config", "eval_scenes", int),
    "init_seed": ("config", "init_seed", int),
    "lam_f": ("config", "lam_f", float),
    "lam_b": ("config", "lam_b", float),
    "so_lam": ("config", "so_lam", float),
}

_RANGE_KEYS = {
    "object_count_min": ("object_count_range", 0),
    "object_count_max": ("object_count_range", 1),
    "object_depth_min": ("object_depth_range", 0),
    "object_depth_max": ("object_depth_range", 1),
}


def parse_config(text: str, source: str = "config") -> ToyConfig:
    """Parse a key=value config into a ToyConfig (defaults fill the gaps)."""
    scene_updates: dict = {}
    config_updates: dict = {}
    range_parts: dict[str, dict[int, float]] = {}

    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = (part.strip() for part in line.partition("="))
        if not sep or not key or not value:
            raise ParseError(f"expected 'key = value', got {raw!r}",
                             source=source, line=lineno)
        if key not in _SCHEMA:
            raise ParseError(f"unknown config key {key!r}", source=source, line=lineno)
        target, field, typ = _SCHEMA[key]
        try:
            parsed = typ(value)
        except ValueError as exc:
            raise ParseError(f"bad value for {key}: {exc}", source=source, line=lineno) from exc
        if key in _RANGE_KEYS:
            field, slot = _RANGE_KEYS[key]
            range_parts.setdefault(field, {})[slot] = parsed
        elif target == "scene":
            scene_updates[field] = parsed
        else:
            config_updates[field] = parsed

    scene = SceneParams()
    for field, slots in range_parts.items():
        current = list(getattr(scene, field))
        for slot, value in slots.items():
            current[slot] = value
        scene_updates[field] = tuple(current)
    if scene_updates:
        scene = replace(scene, **scene_updates)
    return ToyConfig(scene=scene, **config_updates)


def format_config(config: ToyConfig) -> str:
    """Serialize a ToyConfig in the same key=value format (all keys, sorted)."""
    values = {
        "height": config.scene.height,
        "width": config.scene.width,
        "horizon_frac": config.scene.horizon_frac,
        "ground_near": config.scene.ground_near,
        "ground_far": config.scene.ground_far,
        "object_count_min": config.scene.object_count_range[0],
        "object_count_max": config.scene.object_count_range[1],
        "object_depth_min": config.scene.object_depth_range[0],
        "object_depth_max": config.scene.object_depth_range[1],
        "noise_amplitude": config.scene.noise_amplitude,
        "seed": config.scene.seed,
        "num_bins": config.num_bins,
        "d_min": config.d_min,
        "d_max": config.d_max,
        "hidden": config.hidden,
        "kernel": config.kernel,
        "steps": config.steps,
        "lr": config.lr,
        "lr_decay_step": config.lr_decay_step,
        "lr_decay": config.lr_decay,
        "train_scenes": config.train_scenes,
        "eval_scenes": config.eval_scenes,
        "init_seed": config.init_seed,
        "lam_f": config.lam_f,
        "lam_b": config.lam_b,
        "so_lam": config.so_lam,
    }
    return "\n".join(f"{key} = {values[key]}" for key in sorted(values)) + "\n"
