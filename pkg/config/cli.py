"""
Command-line interface: ``generate``, ``estimate``, ``evaluate`` and ``visualize``.

``cli_main`` returns the process exit code: 0 on success, 1 for usage and
validation errors, 2 for file and format errors.
"""

import logging
import logging.config
from pathlib import Path

import click
import numpy as np

from odometry import metrics, serializers as prediction_io
from odometry.estimator import estimate_pixelwise
from odometry.models import ScenePrediction, WeightSign
from odometry.refinement import reconstruct_ego_flow, refine_pose, uncertainty_weights
from odometry.selection import aggregate, average_pose, partition
from synthesis import formats
from synthesis.exceptions import (
    FormatError,
    GenerationFailedError,
    InvalidArgumentError,
    OutputExistsError,
    ValidationError,
)
from synthesis.generator import MIN_SIZE, generate_batch
from synthesis.models import GenerationConfig
from synthesis.serializers import MANIFEST_NAME, load_scene, save_scene

from . import settings

logger = logging.getLogger(__name__)


class ObjectRange(click.ParamType):
    """``MIN..MAX`` (or a single ``N``) count of moving objects per scene."""

    name = "MIN..MAX"

    def convert(self, value, param, ctx):
        if isinstance(value, tuple):
            return value
        low, sep, high = str(value).partition("..")
        try:
            low = int(low)
            high = int(high) if sep else low
        except ValueError:
            self.fail(f"{value!r} is not of the form MIN..MAX", param, ctx)
        if low < 0 or high < low:
            self.fail(f"{value!r} must satisfy 0 <= MIN <= MAX", param, ctx)
        return low, high


def _scene_name(manifest):
    manifest = Path(manifest)
    return manifest.name if manifest.is_dir() else manifest.parent.name


def _refuse_existing(paths, force):
    if force:
        return
    for path in paths:
        if Path(path).exists():
            raise OutputExistsError(f"{path} exists; pass --force to overwrite")


@click.group()
def cli():
    """Synthesize rigid-flow scenes and estimate camera motion from them."""


@cli.command()
@click.option("--count", type=click.IntRange(min=1), default=settings.DEFAULT_COUNT, show_default=True)
@click.option("--height", type=click.IntRange(min=MIN_SIZE), default=settings.DEFAULT_HEIGHT, show_default=True)
@click.option("--width", type=click.IntRange(min=MIN_SIZE), default=settings.DEFAULT_WIDTH, show_default=True)
@click.option("--seed", type=click.IntRange(min=0), default=settings.DEFAULT_SEED, show_default=True)
@click.option("--objects", type=ObjectRange(), default="0..5", show_default=True)
@click.option("--out", type=click.Path(file_okay=False, path_type=Path), required=True)
@click.option("--workers", type=click.IntRange(min=1), default=None, help="Defaults to FLOWODOM_WORKERS.")
@click.option("--force", is_flag=True, help="Overwrite existing scenes.")
def generate(count, height, width, seed, objects, out, workers, force):
    """Write COUNT scenes with seeds SEED..SEED+COUNT-1 into OUT."""
    config = GenerationConfig(object_count_range=objects).validate()
    directories = [out / settings.SCENE_DIR_TEMPLATE.format(index=i) for i in range(count)]
    _refuse_existing([d / MANIFEST_NAME for d in directories], force)
    seeds = [seed + i for i in range(count)]
    scenes = generate_batch(seeds, height, width, config, workers or settings.WORKERS)
    for directory, scene in zip(directories, scenes):
        save_scene(scene, directory, force=force)
    click.echo(f"wrote {count} scene(s) to {out}")


@cli.command()
@click.option("--scene", "manifest", type=click.Path(path_type=Path), required=True)
@click.option("--patch-size", type=click.IntRange(min=1), default=settings.DEFAULT_PATCH_SIZE, show_default=True)
@click.option("--window", type=click.IntRange(min=5), default=settings.DEFAULT_WINDOW, show_default=True)
@click.option(
    "--weight-sign",
    type=click.Choice([sign.value for sign in WeightSign]),
    default=settings.DEFAULT_WEIGHT_SIGN,
    show_default=True,
)
@click.option(
    "--aggregate",
    "aggregation",
    type=click.Choice(settings.AGGREGATIONS),
    default=settings.DEFAULT_AGGREGATION,
    show_default=True,
    help="Fuse by uncertainty-driven patch selection or by plain averaging of the maps.",
)
@click.option("--refine", is_flag=True, help="Refine the fused pose on the reprojection error.")
@click.option("--out", type=click.Path(dir_okay=False, path_type=Path), required=True)
@click.option("--force", is_flag=True)
def estimate(manifest, patch_size, window, weight_sign, aggregation, refine, out, force):
    """Estimate the camera motion of one scene."""
    _refuse_existing([out], force)
    scene = load_scene(manifest)
    pixelwise = estimate_pixelwise(scene.total_flow, scene.depth, scene.intrinsics, window=window)
    grid = partition(*scene.depth.shape, patch_size)
    if aggregation == "mean":
        pose = average_pose(pixelwise, grid)
    else:
        pose = aggregate(pixelwise, grid, WeightSign(weight_sign))
    refinement = None
    if refine:
        # without ground-truth ego flow, low-uncertainty pixels of the total flow stand in for it
        weights = uncertainty_weights(pixelwise.translation_log_var)
        result = refine_pose(pose, scene.total_flow, scene.intrinsics, scene.depth, weights=weights)
        pose = result.pose
        refinement = {
            "iterations": int(result.iterations),
            "cost": float(result.cost),
            "converged": bool(result.converged),
        }
    ego_flow, _ = reconstruct_ego_flow(pose, scene.intrinsics, scene.depth)
    prediction = ScenePrediction(
        name=_scene_name(manifest),
        pose=pose,
        ego_flow=ego_flow,
        pixelwise=pixelwise,
        seed=scene.seed,
        refinement=refinement,
    )
    extra = {
        "selection": {
            "aggregation": aggregation,
            "patch_size": patch_size,
            "window": window,
            "weight_sign": weight_sign,
        }
    }
    prediction_io.save_prediction(prediction, out, force=force, extra=extra)
    click.echo(
        "rotation {} translation {}".format(
            np.array2string(np.array(pose.rotation), precision=6),
            np.array2string(np.array(pose.translation), precision=6),
        )
    )


@cli.command()
@click.option("--pred", "pred_dir", type=click.Path(file_okay=False, path_type=Path), required=True)
@click.option("--gt", "gt_dir", type=click.Path(file_okay=False, path_type=Path), required=True)
@click.option("--l1-reduce", type=click.Choice(metrics.L1_REDUCTIONS), default=settings.DEFAULT_L1_REDUCE, show_default=True)
@click.option("--epe", "epe_norm", type=click.Choice(metrics.EPE_NORMS), default=settings.DEFAULT_EPE_NORM, show_default=True)
@click.option("--out", type=click.Path(dir_okay=False, path_type=Path), required=True)
@click.option("--force", is_flag=True)
def evaluate(pred_dir, gt_dir, l1_reduce, epe_norm, out, force):
    """Score every prediction in PRED against the scene of the same name in GT."""
    _refuse_existing([out], force)
    if not pred_dir.is_dir() or not gt_dir.is_dir():
        raise FileNotFoundError(f"{pred_dir if not pred_dir.is_dir() else gt_dir} is not a directory")
    candidates = sorted(pred_dir.glob("*.json"))
    paths = [path for path in candidates if prediction_io.is_prediction_file(path)]
    for path in sorted(set(candidates) - set(paths)):
        logger.info("skipping %s: not a prediction file", path)
    predictions = [prediction_io.load_prediction(path) for path in paths]
    manifests = {
        path.parent.name: path for path in sorted(gt_dir.glob(f"*/{MANIFEST_NAME}"))
    }
    if len(predictions) != len(manifests):
        raise InvalidArgumentError(
            f"{pred_dir} holds {len(predictions)} predictions but {gt_dir} holds "
            f"{len(manifests)} scenes"
        )
    unknown = [p.name for p in predictions if p.name not in manifests]
    if unknown:
        raise InvalidArgumentError(f"no ground truth for predicted scenes {unknown}")
    scenes = [load_scene(manifests[p.name]) for p in predictions]
    report = metrics.evaluate(predictions, scenes, l1_reduce, epe_norm)
    prediction_io.save_report(report, out, force=force)
    epe_text = "n/a" if report.epe is None else f"{report.epe:.6g} px"
    click.echo(
        f"scenes={len(report.scenes)} r_err={report.r_err:.6g} rad "
        f"t_err={report.t_err:.6g} epe={epe_text}"
    )


@cli.command()
@click.option("--scene", "manifest", type=click.Path(path_type=Path), required=True)
@click.option("--pred", "prediction_path", type=click.Path(dir_okay=False, path_type=Path), default=None,
              help="Use the maps of an existing prediction instead of estimating.")
@click.option("--window", type=click.IntRange(min=5), default=settings.DEFAULT_WINDOW, show_default=True)
@click.option("--out", type=click.Path(file_okay=False, path_type=Path), required=True)
@click.option("--force", is_flag=True)
def visualize(manifest, prediction_path, window, out, force):
    """Render flow, depth and uncertainty panels of one scene as PNG files."""
    scene = load_scene(manifest)
    if prediction_path is not None:
        pixelwise = prediction_io.load_prediction(prediction_path).pixelwise
        if pixelwise is None:
            raise InvalidArgumentError(f"{prediction_path} stores no pixel-wise maps")
    else:
        pixelwise = estimate_pixelwise(scene.total_flow, scene.depth, scene.intrinsics, window=window)

    magnitude = np.linalg.norm(scene.total_flow, axis=-1)
    scale = float(np.percentile(magnitude, 99)) or None
    panels = {
        "total_flow.png": formats.visualize_flow(scene.total_flow, scale),
        "ego_flow.png": formats.visualize_flow(scene.ego_flow, scale),
        "depth.png": formats.visualize_scalar(scene.depth, cmap="viridis"),
        "rotation_uncertainty.png": formats.visualize_scalar(pixelwise.rotation_log_var),
        "translation_uncertainty.png": formats.visualize_scalar(pixelwise.translation_log_var),
    }
    for index, item in enumerate(scene.objects):
        panels[f"object_{index:02d}_flow.png"] = formats.visualize_flow(item.flow, scale)
    _refuse_existing([out / name for name in panels], force)
    out.mkdir(parents=True, exist_ok=True)
    for name, image in panels.items():
        formats.save_png(out / name, image)
    click.echo(f"wrote {len(panels)} panels to {out}")


def cli_main(argv=None) -> int:
    logging.config.dictConfig(settings.LOGGING)
    try:
        result = cli.main(args=argv, prog_name="flowodom", standalone_mode=False)
    except click.UsageError as exc:
        exc.show()
        return 1
    except click.Abort:
        click.echo("Aborted!", err=True)
        return 1
    except (ValidationError, GenerationFailedError) as exc:
        click.echo(f"Error: {exc}", err=True)
        return 1
    except (FormatError, OSError) as exc:
        click.echo(f"Error: {exc}", err=True)
        return 2
    except click.ClickException as exc:
        exc.show()
        return 1
    return result if isinstance(result, int) else 0
