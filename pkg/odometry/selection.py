"""
Fusion of pixel-wise pose maps into one global pose.

The maps are split into ``k x k`` patches. Each patch contributes the pixel with
the lowest log-variance, independently per channel, and the patch
contributions are averaged with softmax weights over the whole image.
"""

import logging

import numpy as np

from synthesis.exceptions import InvalidArgumentError

from .models import GlobalPose, PatchGrid, PixelwisePose, WeightSign

logger = logging.getLogger(__name__)


def partition(height, width, patch_size) -> PatchGrid:
    """Patch layout for an ``height x width`` map; non-multiples are center-cropped."""
    if patch_size < 1:
        raise InvalidArgumentError(f"patch size must be at least 1, got {patch_size}")
    if patch_size > min(height, width):
        raise InvalidArgumentError(
            f"patch size {patch_size} exceeds the {height}x{width} map"
        )
    rows, cols = height // patch_size, width // patch_size
    return PatchGrid(
        patch_size=patch_size,
        rows=rows,
        cols=cols,
        row_offset=(height - rows * patch_size) // 2,
        col_offset=(width - cols * patch_size) // 2,
    )


def select_pixels(uncertainty, grid: PatchGrid):
    """Per-patch, per-channel index of the least uncertain pixel.

    Returns an integer array ``rows x cols x C`` of row-major positions inside
    each patch; ties go to the first pixel.
    """
    uncertainty = np.asarray(uncertainty, dtype=np.float64)
    if uncertainty.ndim == 2:
        uncertainty = uncertainty[..., None]
    if not np.all(np.isfinite(uncertainty)):
        raise InvalidArgumentError("uncertainty map must be finite")
    return np.argmin(grid.patches(uncertainty), axis=2)


def _gather(values, indices, grid):
    patches = grid.patches(np.asarray(values, dtype=np.float64))
    return np.take_along_axis(patches, indices[:, :, None, :], axis=2)[:, :, 0, :]


def patch_weights(selected_uncertainty, sign=WeightSign.NEGATED):
    """Softmax over patches of the selected uncertainties, one column per channel."""
    sign = WeightSign(sign)
    values = np.asarray(selected_uncertainty, dtype=np.float64)
    logits = -values if sign is WeightSign.NEGATED else values
    logits = logits.reshape(-1, logits.shape[-1])
    logits = logits - logits.max(axis=0)
    weights = np.exp(logits)
    weights /= weights.sum(axis=0)
    return weights.reshape(values.shape)


def _fuse(values, uncertainty, grid, sign):
    indices = select_pixels(uncertainty, grid)
    weights = patch_weights(_gather(uncertainty, indices, grid), sign)
    return np.sum(weights * _gather(values, indices, grid), axis=(0, 1))


def aggregate(pose: PixelwisePose, grid: PatchGrid, sign=WeightSign.NEGATED) -> GlobalPose:
    """Fuse rotation and translation maps with their own uncertainty maps."""
    sign = WeightSign(sign)
    rotation = _fuse(pose.rotation, pose.rotation_log_var, grid, sign)
    translation = _fuse(pose.translation, pose.translation_log_var, grid, sign)
    logger.debug("fused %d patches with %s weights", grid.count, sign.value)
    return GlobalPose(rotation, translation)


def average_pose(pose: PixelwisePose, grid: PatchGrid = None) -> GlobalPose:
    """Uniform mean of the pixel-wise maps, ignoring uncertainty."""
    rotation, translation = pose.rotation, pose.translation
    if grid is not None:
        rotation, translation = grid.crop(rotation), grid.crop(translation)
    return GlobalPose(rotation.mean(axis=(0, 1)), translation.mean(axis=(0, 1)))
