"""
Benchmark Engine for svs-refine

Orchestrates the convergence comparison:
1. Teacher training on the synthetic task
2. Channel pruning
3. Student initialization (pruned, scaled, random)
4. Student fine-tuning with shared batches
5. Curves, thresholds and spectra summary
"""

import csv
import io
import json
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, fields
from enum import Enum
from pathlib import Path
from typing import Dict, List, Optional

import numpy as np
import yaml

from ..constants import (
    DEFAULT_TOY_DIMS,
    LOSS_RECORD_INTERVAL,
    PACKAGED_BENCH_CONFIG_PATH,
    SMOOTHING_WINDOW,
    SPARSITY_SWEEP,
    THRESHOLD_FACTOR,
    atomic_write_bytes,
    worker_count,
)
from ..exceptions import ConfigurationError, FileOperationError, TrainingError
from ..refine_pipeline import RefineConfig, refine_checkpoint
from ..scaling import ScalerKind
from ..spectrum_report import SpectrumStats, compute_stats
from ..svd_core import singular_values
from ..validation import ValidationError, validate_dims, validate_sparsity
from .toynet import ToyNet, he_init, make_teacher, prune_channels, random_normal

logger = logging.getLogger(__name__)


class InitKind(str, Enum):
    PRUNED = "pruned"
    SCALED = "scaled"
    RANDOM_HE = "random_he"
    RANDOM_NORMAL = "random_normal"


@dataclass
class BenchConfig:
    """Benchmark settings; mirrors the keys of the YAML config file."""

    seed: int = 0
    num_seeds: int = 5
    sparsity: float = 0.5
    sweep_sparsities: tuple = SPARSITY_SWEEP
    dims: tuple = DEFAULT_TOY_DIMS
    teacher_steps: int = 4000
    teacher_lr: float = 0.05
    student_steps: int = 1500
    lr: float = 0.01
    batch: int = 64
    eval_batch: int = 256
    inits: tuple = ("pruned", "scaled", "random_he")
    record_interval: int = LOSS_RECORD_INTERVAL
    smoothing_window: int = SMOOTHING_WINDOW
    threshold_factor: float = THRESHOLD_FACTOR
    workers: Optional[int] = None

    def __post_init__(self):
        try:
            self.sparsity = validate_sparsity(self.sparsity)
            self.sweep_sparsities = tuple(
                validate_sparsity(s) for s in self.sweep_sparsities
            )
            self.dims = validate_dims(self.dims)
        except ValidationError as e:
            raise ConfigurationError(
                "Invalid benchmark configuration", original_error=e
            ) from e
        try:
            self.inits = tuple(InitKind(i).value for i in self.inits)
        except ValueError as e:
            raise ConfigurationError(
                "Unknown init",
                config_key="inits",
                config_value=list(self.inits),
                original_error=e,
            ) from e
        if not self.inits:
            raise ConfigurationError("At least one init is required", config_key="inits")

        positive = ("num_seeds", "batch", "eval_batch", "record_interval", "smoothing_window")
        for key in positive + ("seed", "teacher_steps", "student_steps"):
            value = getattr(self, key)
            lowest = 1 if key in positive else 0
            if isinstance(value, bool) or not isinstance(value, int) or value < lowest:
                raise ConfigurationError(
                    f"{key} must be an integer >= {lowest}",
                    config_key=key,
                    config_value=value,
                )
        for key in ("lr", "teacher_lr"):
            value = getattr(self, key)
            if not (isinstance(value, (int, float)) and math.isfinite(value) and value >= 0):
                raise ConfigurationError(
                    f"{key} must be >= 0", config_key=key, config_value=value
                )
        if not self.threshold_factor >= 1:
            raise ConfigurationError(
                "threshold_factor must be >= 1",
                config_key="threshold_factor",
                config_value=self.threshold_factor,
            )

    @property
    def seeds(self) -> list:
        return list(range(self.seed, self.seed + self.num_seeds))


@dataclass
class LossCurve:
    init: str
    seed: int
    steps: list
    losses: list
    diverged: bool = False

    def smoothed(self, window: int) -> list:
        """Trailing mean over the last *window* recorded losses."""
        values = np.asarray(self.losses, dtype=np.float64)
        out = []
        for i in range(len(values)):
            out.append(float(np.mean(values[max(0, i - window + 1) : i + 1])))
        return out

    def final_loss(self, window: int) -> float:
        return self.smoothed(window)[-1] if self.losses else math.inf


@dataclass
class SeedResult:
    seed: int
    curves: Dict[str, LossCurve]
    final_loss: Dict[str, float]
    steps_to_threshold: Dict[str, Optional[int]]
    spectra: Dict[str, List[SpectrumStats]]
    spectral_deviation: float


@dataclass
class BenchReport:
    sparsity: float
    inits: tuple
    results: List[SeedResult] = field(default_factory=list)

    @property
    def curves(self) -> list:
        return [r.curves[init] for r in self.results for init in self.inits]

    @property
    def median_final_loss(self) -> dict:
        return {
            init: float(np.median([r.final_loss[init] for r in self.results]))
            for init in self.inits
        }

    @property
    def max_spectral_deviation(self) -> float:
        return max((r.spectral_deviation for r in self.results), default=0.0)

    @property
    def scaled_beats_pruned(self) -> Optional[bool]:
        medians = self.median_final_loss
        if "scaled" not in medians or "pruned" not in medians:
            return None
        return medians["scaled"] <= medians["pruned"]


def load_config(config_path=PACKAGED_BENCH_CONFIG_PATH) -> BenchConfig:
    """
    Load benchmark configuration from a flat YAML file

    Args:
        config_path: Path to configuration file

    Returns:
        Validated BenchConfig
    """
    path = Path(config_path)
    try:
        with open(path, "r") as f:
            data = yaml.safe_load(f)
    except OSError as e:
        raise FileOperationError(
            "Cannot read benchmark config",
            file_path=str(path),
            operation="read",
            original_error=e,
        ) from e
    except yaml.YAMLError as e:
        raise ConfigurationError(
            "Benchmark config is not valid YAML", original_error=e
        ) from e

    data = data or {}
    if not isinstance(data, dict):
        raise ConfigurationError(
            "Benchmark config must be a mapping", config_value=type(data).__name__
        )
    known = {f.name for f in fields(BenchConfig)}
    unknown = sorted(set(data) - known)
    if unknown:
        raise ConfigurationError(
            "Unknown benchmark config keys", config_key=",".join(unknown)
        )
    for key in ("sweep_sparsities", "dims", "inits"):
        if isinstance(data.get(key), list):
            data[key] = tuple(data[key])
    return BenchConfig(**data)


def train_student(
    net: ToyNet, teacher: ToyNet, cfg: BenchConfig, seed: int, init: str = "student"
) -> LossCurve:
    """
    Fine-tune *net* in place to match *teacher* with plain SGD

    Training batches come from a generator keyed on *seed* only, so every
    init of one seed sees the same batches. Losses are measured on a fixed
    evaluation batch every record_interval steps, including step 0 and the
    last step. A non-finite loss stops the run and fills the rest of the grid
    with inf.
    """
    if net.dims[0] != teacher.dims[0] or net.dims[-1] != teacher.dims[-1]:
        raise TrainingError(
            f"Student {net.dims} and teacher {teacher.dims} disagree on input/output width",
            init=init,
            seed=seed,
        )
    batch_rng = np.random.default_rng([seed, 1])
    eval_x = np.random.default_rng([seed, 2]).standard_normal((cfg.eval_batch, net.dims[0]))
    eval_y = teacher.forward(eval_x)

    grid = list(range(0, cfg.student_steps + 1, cfg.record_interval))
    if grid[-1] != cfg.student_steps:
        grid.append(cfg.student_steps)
    losses = []
    diverged = False
    with np.errstate(over="ignore", invalid="ignore"):
        step = 0
        for target in grid:
            while step < target:
                x = batch_rng.standard_normal((cfg.batch, net.dims[0]))
                loss = net.sgd_step(x, teacher.forward(x), cfg.lr)
                step += 1
                if not math.isfinite(loss):
                    diverged = True
                    break
            if diverged:
                break
            value = net.loss(eval_x, eval_y)
            if not math.isfinite(value):
                diverged = True
                break
            losses.append(value)

    if diverged:
        logger.warning("Run %s seed %d diverged at step %d", init, seed, step)
        losses.extend([math.inf] * (len(grid) - len(losses)))
    return LossCurve(init=init, seed=seed, steps=grid, losses=losses, diverged=diverged)


def _layer_spectra(net: ToyNet) -> list:
    return [compute_stats(singular_values(w)) for w in net.weights]


def _spectral_deviation(pruned: list, scaled: list) -> float:
    """Max relative gap between kappa(scaled) and sqrt(kappa(pruned)) over full-rank layers."""
    worst = 0.0
    for before, after in zip(pruned, scaled):
        if before.condition_infinite or after.condition_infinite:
            continue
        expected = math.sqrt(before.condition)
        worst = max(worst, abs(after.condition - expected) / expected)
    return worst


def build_inits(teacher: ToyNet, cfg: BenchConfig, seed: int, sparsity: float) -> dict:
    """Student nets for every configured init; all share the pruned widths."""
    pruned = prune_channels(teacher, sparsity)
    nets = {}
    for init in cfg.inits:
        if init == InitKind.PRUNED.value:
            nets[init] = pruned.copy()
        elif init == InitKind.SCALED.value:
            refined = refine_checkpoint(
                pruned.to_checkpoint(), RefineConfig(scaler=ScalerKind.SQRT, workers=1)
            )
            nets[init] = ToyNet.from_checkpoint(refined.checkpoint, teacher.slope)
        elif init == InitKind.RANDOM_HE.value:
            nets[init] = he_init(pruned.dims, np.random.default_rng([seed, 6]))
        else:
            nets[init] = random_normal(pruned.dims, np.random.default_rng([seed, 7]))
    return nets


def _run_seed(cfg: BenchConfig, seed: int, sparsity: float) -> SeedResult:
    teacher = make_teacher(seed, cfg.dims, cfg.teacher_steps, cfg.teacher_lr, cfg.batch)
    nets = build_inits(teacher, cfg, seed, sparsity)
    spectra = {init: _layer_spectra(net) for init, net in nets.items()}

    deviation = 0.0
    if "pruned" in spectra and "scaled" in spectra:
        deviation = _spectral_deviation(spectra["pruned"], spectra["scaled"])
    elif "scaled" in spectra:
        deviation = _spectral_deviation(
            _layer_spectra(prune_channels(teacher, sparsity)), spectra["scaled"]
        )

    curves = {init: train_student(net, teacher, cfg, seed, init) for init, net in nets.items()}
    final = {init: c.final_loss(cfg.smoothing_window) for init, c in curves.items()}
    best = min(final.values())
    threshold = cfg.threshold_factor * best
    reached = {}
    for init, curve in curves.items():
        hit = None
        if math.isfinite(best):
            for step, value in zip(curve.steps, curve.smoothed(cfg.smoothing_window)):
                if value <= threshold:
                    hit = step
                    break
        reached[init] = hit
    logger.info(
        "Seed %d sparsity %.2f final losses: %s",
        seed,
        sparsity,
        ", ".join(f"{k}={v:.4g}" for k, v in final.items()),
    )
    return SeedResult(seed, curves, final, reached, spectra, deviation)


def run_comparison(cfg: BenchConfig, sparsity: Optional[float] = None) -> BenchReport:
    """Run every configured seed at one sparsity; seeds may run concurrently."""
    sparsity = cfg.sparsity if sparsity is None else validate_sparsity(sparsity)
    seeds = cfg.seeds
    workers = min(cfg.workers or worker_count(), len(seeds))
    if workers <= 1:
        results = [_run_seed(cfg, seed, sparsity) for seed in seeds]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(_run_seed, cfg, seed, sparsity) for seed in seeds]
            results = [f.result() for f in futures]
    return BenchReport(sparsity=sparsity, inits=cfg.inits, results=results)


def run_sweep(cfg: BenchConfig) -> list:
    return [run_comparison(cfg, s) for s in cfg.sweep_sparsities]


def _number(value: float):
    return "inf" if math.isinf(value) else float(value)


def curves_csv(report: BenchReport) -> bytes:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(["init", "seed", "step", "loss"])
    for curve in report.curves:
        for step, loss in zip(curve.steps, curve.losses):
            writer.writerow([curve.init, curve.seed, step, repr(float(loss))])
    return buffer.getvalue().encode("utf-8")


def summary_dict(report: BenchReport) -> dict:
    return {
        "sparsity": report.sparsity,
        "inits": list(report.inits),
        "seeds": [r.seed for r in report.results],
        "median_final_loss": {k: _number(v) for k, v in report.median_final_loss.items()},
        "scaled_beats_pruned": report.scaled_beats_pruned,
        "max_spectral_deviation": report.max_spectral_deviation,
        "runs": [
            {
                "seed": r.seed,
                "final_loss": {k: _number(v) for k, v in r.final_loss.items()},
                "steps_to_threshold": r.steps_to_threshold,
                "diverged": {k: c.diverged for k, c in r.curves.items()},
                "spectral_deviation": r.spectral_deviation,
                "spectra": {
                    init: [
                        {
                            "layer": i,
                            "sigma_max": s.sigma_max,
                            "sigma_min": s.sigma_min,
                            "condition": _number(s.condition),
                            "stable_rank": s.stable_rank,
                        }
                        for i, s in enumerate(stats)
                    ]
                    for init, stats in r.spectra.items()
                },
            }
            for r in report.results
        ],
    }


def summary_json(reports) -> bytes:
    """JSON summary of one report, or a list for a sparsity sweep."""
    if isinstance(reports, BenchReport):
        payload = summary_dict(reports)
    else:
        payload = [summary_dict(r) for r in reports]
    return (json.dumps(payload, indent=2) + "\n").encode("utf-8")


def write_results(reports, output_dir) -> list:
    """
    Write curves CSV and summary JSON under *output_dir*

    A single report gives curves.csv and summary.json; a sweep writes one
    curves CSV per sparsity next to a combined summary.json.

    Returns:
        Paths written
    """
    output_dir = Path(output_dir)
    single = isinstance(reports, BenchReport)
    batch = [reports] if single else list(reports)
    written = []
    try:
        for report in batch:
            name = "curves.csv" if single else f"curves_sparsity_{report.sparsity:g}.csv"
            path = output_dir / name
            atomic_write_bytes(curves_csv(report), path)
            written.append(path)
        path = output_dir / "summary.json"
        atomic_write_bytes(summary_json(reports), path)
        written.append(path)
    except OSError as e:
        raise FileOperationError(
            "Cannot write benchmark results",
            file_path=str(output_dir),
            operation="write",
            original_error=e,
        ) from e
    for path in written:
        logger.info("Wrote %s", path)
    return written
