"""
Pose error functions, the heteroscedastic uncertainty loss and the flow and
depth reconstruction losses.
"""

import logging
from typing import NamedTuple

import numpy as np

from synthesis.exceptions import InvalidArgumentError

from .models import LOG_VARIANCE_LIMIT, LossBreakdown, PixelwisePose

logger = logging.getLogger(__name__)


class DepthLoss(NamedTuple):
    value: float
    valid_count: int


def _pair(x, y):
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape:
        raise InvalidArgumentError(f"shape mismatch: {x.shape} vs {y.shape}")
    return x, y


def rotation_error(x, y):
    """``||x - y||`` over the last axis."""
    x, y = _pair(x, y)
    return np.linalg.norm(x - y, axis=-1)


def _direction(x):
    norm = np.linalg.norm(x, axis=-1, keepdims=True)
    # the direction of a zero vector is taken to be zero
    return np.divide(x, norm, out=np.zeros_like(x), where=norm > 0), norm[..., 0]


def translation_error(x, y):
    """Direction difference plus squared magnitude difference, over the last axis."""
    x, y = _pair(x, y)
    x_direction, x_norm = _direction(x)
    y_direction, y_norm = _direction(y)
    return np.linalg.norm(x_direction - y_direction, axis=-1) + (x_norm - y_norm) ** 2


def _reduce_log_var(s_map, shape):
    s_map = np.asarray(s_map, dtype=np.float64)
    if s_map.ndim == len(shape) + 1:
        s_map = s_map.mean(axis=-1)
    if s_map.shape != shape:
        raise InvalidArgumentError(f"log-variance shape {s_map.shape} does not match {shape}")
    return np.clip(s_map, -LOG_VARIANCE_LIMIT, LOG_VARIANCE_LIMIT)


def uncertainty_loss(err_map, s_map) -> float:
    """Mean of ``exp(-s) * E + s``; multi-channel ``s`` is averaged per pixel."""
    err_map = np.asarray(err_map, dtype=np.float64)
    s = _reduce_log_var(s_map, err_map.shape)
    return float(np.mean(np.exp(-s) * err_map + s))


def uncertainty_loss_gradient(err_map, s_map):
    """Per-pixel partial derivatives ``(d/dE, d/ds)`` of :func:`uncertainty_loss`."""
    err_map = np.asarray(err_map, dtype=np.float64)
    s = _reduce_log_var(s_map, err_map.shape)
    count = max(err_map.size, 1)
    attenuation = np.exp(-s)
    return attenuation / count, (1.0 - attenuation * err_map) / count


def _weighted_mean(values, weights):
    if weights is None:
        return float(values.mean())
    weights = np.asarray(weights, dtype=np.float64)
    if weights.shape != values.shape:
        raise InvalidArgumentError(
            f"weights shape {weights.shape} does not match {values.shape}"
        )
    return float(np.mean(weights * values))


def flow_recon_loss(predicted, target, weights=None) -> float:
    """Mean per-pixel end-point distance between two flow maps."""
    predicted, target = _pair(predicted, target)
    return _weighted_mean(np.linalg.norm(predicted - target, axis=-1), weights)


def depth_recon_loss(predicted, target, valid=None, weights=None) -> DepthLoss:
    """Mean absolute depth error over ``valid`` pixels; zero when none are valid."""
    predicted, target = _pair(predicted, target)
    valid = np.ones(predicted.shape, dtype=bool) if valid is None else np.asarray(valid, bool)
    if valid.shape != predicted.shape:
        raise InvalidArgumentError(f"validity mask shape {valid.shape} does not match {predicted.shape}")
    count = int(valid.sum())
    if count == 0:
        logger.warning("depth reconstruction loss has no valid pixels")
        return DepthLoss(0.0, 0)
    error = np.abs(predicted - target)
    if weights is not None:
        error = error * np.asarray(weights, dtype=np.float64)
    return DepthLoss(float(error[valid].mean()), count)


def pose_error_maps(pose: PixelwisePose, motion):
    """Per-pixel rotation and translation errors of ``pose`` against ``motion``."""
    rotation = np.broadcast_to(motion.rotation.as_array(), pose.rotation.shape)
    translation = np.broadcast_to(motion.translation_array, pose.translation.shape)
    return rotation_error(pose.rotation, rotation), translation_error(pose.translation, translation)


def total_loss(
    pose: PixelwisePose,
    motion,
    ego_pred,
    ego_gt,
    depth_pred,
    depth_gt,
    valid=None,
    flow_weights=None,
    depth_weights=None,
) -> LossBreakdown:
    rotation_map, translation_map = pose_error_maps(pose, motion)
    return LossBreakdown(
        l_rotation=uncertainty_loss(rotation_map, pose.rotation_log_var),
        l_translation=uncertainty_loss(translation_map, pose.translation_log_var),
        l_depth=depth_recon_loss(depth_pred, depth_gt, valid, depth_weights).value,
        l_flow=flow_recon_loss(ego_pred, ego_gt, flow_weights),
    )
