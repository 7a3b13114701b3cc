"""Training loops and the two headline experiments.

train_model supports three modes:
  * "baseline": single decoder, plain mean cross-entropy. Implemented as
    the separated objective with lam set per scene to the foreground pixel
    share, which equals the unweighted global mean exactly.
  * "single": single decoder, separated objective at a fixed lam.
  * "dual": two decoders; head 0 trains with the foreground-branch loss
    (lam_f) and head 1 with the background-branch loss (lam_b).

run_lambda_sweep trains one single-decoder model per lam with identical
data and init seeds and reports held-out foreground/background SILog.
run_ablation trains the four standard variants (baseline, separated
objective only, separate decoders with per-region objectives, and the
full sensitive-loss system) and evaluates each; the sensitive-loss model
is scored under both the mask-free max merge and the mask-based merge so
the two inference paths can be compared on identical weights.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from ..core import BinSpec, DepthMap, ForegroundMask, LabelMap, make_binspec, \
    decode_depthmap, quantize_depthmap
from ..errors import InvalidRangeError
from ..fusion import mask_merge, max_merge
from ..losses import LossWeights
from ..metrics import MetricsReport, aggregate, evaluate
from .model import ToyModel, forward, init_model, train_step
from .scenes import SceneParams, generate_scene

EVAL_INDEX_BASE = 1_000_000  # eval scenes draw from a disjoint index range


@dataclass(frozen=True)
class ToyConfig:
    scene: SceneParams = field(default_factory=SceneParams)
    num_bins: int = 16
    d_min: float = 1.0
    d_max: float = 80.0
    hidden: int = 8
    kernel: int = 3
    steps: int = 1200
    lr: float = 0.1
    lr_decay_step: int = 1000
    lr_decay: float = 0.1
    train_scenes: int = 16
    eval_scenes: int = 16
    init_seed: int = 1234
    # branch blend weights for the sensitive losses. With region-mean
    # normalization and scarce foreground, a small lam already tilts the
    # foreground branch per-pixel toward objects; the background branch
    # needs most of the mean weight on its own region or it degenerates
    # into a second foreground specialist at this model scale.
    lam_f: float = 0.25
    lam_b: float = 0.95
    so_lam: float = 0.5

    def binspec(self) -> BinSpec:
        return make_binspec(self.d_min, self.d_max, self.num_bins)


@dataclass(frozen=True)
class Sample:
    image: np.ndarray
    gt: DepthMap
    fg: ForegroundMask
    targets: LabelMap

    @property
    def fg_fraction(self) -> float:
        valid_fg = self.gt.validity & self.fg.flags
        return float(valid_fg.sum()) / float(self.gt.validity.sum())


def make_sample(params: SceneParams, index: int, spec: BinSpec) -> Sample:
    image, gt, fg = generate_scene(params, index)
    return Sample(image=image, gt=gt, fg=fg, targets=quantize_depthmap(gt, spec))


def make_dataset(config: ToyConfig) -> tuple[list[Sample], list[Sample]]:
    spec = config.binspec()
    train = [make_sample(config.scene, i, spec) for i in range(config.train_scenes)]
    held_out = [make_sample(config.scene, EVAL_INDEX_BASE + i, spec)
                for i in range(config.eval_scenes)]
    return train, held_out


def train_model(
    config: ToyConfig,
    mode: str,
    lam: float | None = None,
    train_set: list[Sample] | None = None,
) -> ToyModel:
    """Train one model; scenes cycle in index order, batch size 1."""
    if mode not in ("baseline", "single", "dual"):
        raise InvalidRangeError(f"unknown training mode {mode!r}")
    if mode == "single" and lam is None:
        raise InvalidRangeError("mode 'single' needs an explicit lam")
    if train_set is None:
        train_set = make_dataset(config)[0]

    model = init_model(
        num_bins=config.num_bins, hidden=config.hidden, kernel=config.kernel,
        num_heads=2 if mode == "dual" else 1, seed=config.init_seed,
    )
    for step in range(config.steps):
        sample = train_set[step % len(train_set)]
        if mode == "baseline":
            weights = LossWeights(lam=sample.fg_fraction,
                                  lam_f=config.lam_f, lam_b=config.lam_b)
        elif mode == "single":
            weights = LossWeights(lam=lam, lam_f=config.lam_f, lam_b=config.lam_b)
        else:
            weights = LossWeights(lam_f=config.lam_f, lam_b=config.lam_b)
        lr = config.lr * (config.lr_decay if step >= config.lr_decay_step else 1.0)
        model, _ = train_step(model, [(sample.image, sample.targets, sample.fg)],
                              weights, lr)
    return model


def predict_depth(model: ToyModel, sample: Sample, spec: BinSpec, merge: str) -> DepthMap:
    """Decode one scene under the requested inference path."""
    volumes = forward(model, sample.image)
    if merge == "single":
        if len(volumes) != 1:
            raise InvalidRangeError("merge 'single' needs a single-headed model")
        merged = volumes[0]
    elif merge in ("max", "mask"):
        if len(volumes) != 2:
            raise InvalidRangeError(f"merge {merge!r} needs a two-headed model")
        if merge == "max":
            merged = max_merge(volumes[0], volumes[1])
        else:
            merged = mask_merge(volumes[0], volumes[1], sample.fg)
    else:
        raise InvalidRangeError(f"unknown merge mode {merge!r}")
    return decode_depthmap(merged, spec)


def evaluate_model(
    config: ToyConfig, model: ToyModel, merge: str,
    eval_set: list[Sample] | None = None,
) -> MetricsReport:
    if eval_set is None:
        eval_set = make_dataset(config)[1]
    spec = config.binspec()
    reports = [
        evaluate(predict_depth(model, sample, spec, merge), sample.gt, sample.fg)
        for sample in eval_set
    ]
    return aggregate(reports)


@dataclass(frozen=True)
class SweepPoint:
    lam: float
    fg_silog: float
    bg_silog: float


def run_lambda_sweep(lambdas: list[float], config: ToyConfig) -> list[SweepPoint]:
    """Single-decoder separated-objective sweep with shared seeds/schedules."""
    if not lambdas:
        raise InvalidRangeError("sweep needs at least one lam")
    train_set, eval_set = make_dataset(config)
    points = []
    for lam in lambdas:
        model = train_model(config, "single", lam=lam, train_set=train_set)
        report = evaluate_model(config, model, "single", eval_set=eval_set)
        points.append(SweepPoint(
            lam=float(lam),
            fg_silog=report.levels["foreground"].silog,
            bg_silog=report.levels["background"].silog,
        ))
    return points


ABLATION_VARIANTS = ("baseline", "baseline+so", "sd+so", "foresee")


def run_ablation(config: ToyConfig) -> dict[str, MetricsReport]:
    """Train the four ablation variants on identical data and score them.

    Returned keys: "baseline" (single decoder, plain mean loss),
    "baseline+so" (single decoder, separated objective at so_lam),
    "sd+so" (two decoders, each trained purely on its own region, merged
    with the ground-truth mask), "foresee" (two decoders with the
    sensitive losses, mask-free max merge), plus "foresee/mask-merge"
    (the same sensitive-loss model under the mask-based merge).
    """
    train_set, eval_set = make_dataset(config)

    results: dict[str, MetricsReport] = {}

    model = train_model(config, "baseline", train_set=train_set)
    results["baseline"] = evaluate_model(config, model, "single", eval_set=eval_set)

    model = train_model(config, "single", lam=config.so_lam, train_set=train_set)
    results["baseline+so"] = evaluate_model(config, model, "single", eval_set=eval_set)

    hard_split = replace(config, lam_f=1.0, lam_b=1.0)
    model = train_model(hard_split, "dual", train_set=train_set)
    results["sd+so"] = evaluate_model(config, model, "mask", eval_set=eval_set)

    model = train_model(config, "dual", train_set=train_set)
    results["foresee"] = evaluate_model(config, model, "max", eval_set=eval_set)
    results["foresee/mask-merge"] = evaluate_model(config, model, "mask", eval_set=eval_set)

    return results


def format_sweep_columns(points: list[SweepPoint]) -> str:
    lines = ["lam\tfg_silog\tbg_silog"]
    for p in points:
        lines.append(f"{p.lam:.3f}\t{p.fg_silog:.8f}\t{p.bg_silog:.8f}")
    return "\n".join(lines) + "\n"


def format_ablation_table(results: dict[str, MetricsReport]) -> str:
    """Grid of absRel and SILog per variant and level."""
    header = (f"{'variant':<20}"
              + "".join(f"{lvl + ' ' + m:>16}" for lvl in ("fg", "bg", "global")
                        for m in ("absRel", "SILog")))
    lines = [header]
    order = [k for k in (*ABLATION_VARIANTS, "foresee/mask-merge") if k in results]
    for name in order:
        report = results[name]
        row = f"{name:<20}"
        for level in ("foreground", "background", "global"):
            stats = report.levels[level]
            row += f"{stats.abs_rel:>16.6f}{stats.silog:>16.6f}"
        lines.append(row)
    return "\n".join(lines) + "\n"
