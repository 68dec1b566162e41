"""
Evaluation metrics: L1 pose errors, end-point error and how well an
uncertainty map singles out moving objects.
"""

import logging

import numpy as np
from sklearn.metrics import roc_auc_score

from synthesis.exceptions import InvalidArgumentError

from .models import EvalReport, GlobalPose, SceneEvaluation

logger = logging.getLogger(__name__)

L1_REDUCTIONS = ("mean", "sum")
EPE_NORMS = ("l1", "l2")


def _pose_vectors(pose):
    if isinstance(pose, GlobalPose):
        return np.array(pose.rotation), np.array(pose.translation)
    if hasattr(pose, "translation_array"):
        return pose.rotation.as_array(), pose.translation_array
    rotation, translation = pose
    return np.asarray(rotation, dtype=np.float64), np.asarray(translation, dtype=np.float64)


def pose_errors(pred, gt, reduce="mean"):
    """``(r_err, t_err)``: L1 distance of the rotation and translation 3-vectors.

    ``pred`` and ``gt`` may be :class:`GlobalPose`, ``MotionSE3`` or
    ``(rotation, translation)`` pairs.
    """
    if reduce not in L1_REDUCTIONS:
        raise InvalidArgumentError(f"reduce must be one of {L1_REDUCTIONS}, got {reduce!r}")
    reducer = np.mean if reduce == "mean" else np.sum
    pred_rotation, pred_translation = _pose_vectors(pred)
    gt_rotation, gt_translation = _pose_vectors(gt)
    return (
        float(reducer(np.abs(pred_rotation - gt_rotation))),
        float(reducer(np.abs(pred_translation - gt_translation))),
    )


def epe(pred, gt, norm="l1"):
    """Pixel-averaged end-point error; ``l1`` sums ``|du| + |dv|``, ``l2`` is Euclidean."""
    if norm not in EPE_NORMS:
        raise InvalidArgumentError(f"norm must be one of {EPE_NORMS}, got {norm!r}")
    pred = np.asarray(pred, dtype=np.float64)
    gt = np.asarray(gt, dtype=np.float64)
    if pred.shape != gt.shape:
        raise InvalidArgumentError(f"flow shapes differ: {pred.shape} vs {gt.shape}")
    difference = pred - gt
    if norm == "l1":
        per_pixel = np.abs(difference).sum(axis=-1)
    else:
        per_pixel = np.linalg.norm(difference, axis=-1)
    return float(per_pixel.mean())


def object_auroc(log_var, object_mask):
    """AUROC of the channel-mean log-variance as a per-pixel moving-object score."""
    scores = np.asarray(log_var, dtype=np.float64)
    if scores.ndim == 3:
        scores = scores.mean(axis=-1)
    labels = np.asarray(object_mask, dtype=bool)
    if labels.shape != scores.shape:
        raise InvalidArgumentError(f"mask shape {labels.shape} does not match {scores.shape}")
    if labels.all() or not labels.any():
        raise InvalidArgumentError("AUROC needs both object and background pixels")
    return float(roc_auc_score(labels.ravel(), scores.ravel()))


def evaluate(predictions, scenes, reduce="mean", norm="l1") -> EvalReport:
    """Score predictions against the scenes they were estimated from, in order."""
    predictions = list(predictions)
    scenes = list(scenes)
    if len(predictions) != len(scenes):
        raise InvalidArgumentError(
            f"got {len(predictions)} predictions for {len(scenes)} scenes"
        )
    if not scenes:
        raise InvalidArgumentError("nothing to evaluate")
    rows = []
    for prediction, scene in zip(predictions, scenes):
        r_err, t_err = pose_errors(prediction.pose, scene.camera_motion, reduce)
        flow_error = None
        if prediction.ego_flow is not None:
            flow_error = epe(prediction.ego_flow, scene.ego_flow, norm)
        rows.append(SceneEvaluation(prediction.name, r_err, t_err, flow_error))
    flow_errors = [row.epe for row in rows if row.epe is not None]
    report = EvalReport(
        r_err=float(np.mean([row.r_err for row in rows])),
        t_err=float(np.mean([row.t_err for row in rows])),
        epe=float(np.mean(flow_errors)) if len(flow_errors) == len(rows) else None,
        scenes=rows,
        l1_reduce=reduce,
        epe_norm=norm,
    )
    logger.info(
        "evaluated %d scenes: r_err=%.4g rad, t_err=%.4g", len(rows), report.r_err, report.t_err
    )
    return report
