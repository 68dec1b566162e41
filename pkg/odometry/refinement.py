"""
Ego-flow reconstruction from a global pose and pose refinement on the
reprojection error.
"""

import logging

import numpy as np

from synthesis.exceptions import BehindCameraError, InvalidArgumentError
from synthesis.generator import rigid_flow
from synthesis.models import NEAR_PLANE, PixelGrid, validate_depth, validate_flow

from .models import GlobalPose, RefineConfig, RefineResult

logger = logging.getLogger(__name__)

DEFAULT_REFINE = RefineConfig()


def reconstruct_ego_flow(pose: GlobalPose, intrinsics, depth, grid=None, near_plane=NEAR_PLANE):
    """Flow and moved depth of the static scene under the camera motion ``pose``."""
    return rigid_flow(intrinsics, depth, pose.to_motion(), grid, near_plane)


def uncertainty_weights(translation_log_var):
    """Per-pixel weights ``exp(-(s - min s))`` from a (channel-averaged) log-variance map."""
    s = np.asarray(translation_log_var, dtype=np.float64)
    if s.ndim == 3:
        s = s.mean(axis=-1)
    return np.exp(-(s - s.min()))


class _Objective:
    def __init__(self, target, intrinsics, depth, grid, weights, near_plane):
        self.target = target
        self.intrinsics = intrinsics
        self.depth = depth
        self.grid = grid
        self.weights = weights
        self.near_plane = near_plane

    def residual(self, vector):
        flow, _ = reconstruct_ego_flow(
            GlobalPose.from_vector(vector), self.intrinsics, self.depth, self.grid, self.near_plane
        )
        difference = flow - self.target
        if self.weights is not None:
            difference = difference * self.weights[..., None]
        return difference.ravel()

    def jacobian(self, vector, step):
        columns = []
        for index in range(vector.size):
            offset = np.zeros_like(vector)
            offset[index] = step
            try:
                column = (self.residual(vector + offset) - self.residual(vector - offset)) / (2 * step)
            except BehindCameraError:
                # one-sided difference from the point itself
                try:
                    column = (self.residual(vector + offset) - self.residual(vector)) / step
                except BehindCameraError:
                    column = (self.residual(vector) - self.residual(vector - offset)) / step
            columns.append(column)
        return np.stack(columns, axis=1)


def refine_pose(
    init: GlobalPose,
    target_flow,
    intrinsics,
    depth,
    grid=None,
    weights=None,
    config=DEFAULT_REFINE,
    near_plane=NEAR_PLANE,
) -> RefineResult:
    """Minimize the squared reprojection error of ``target_flow`` over the pose.

    Levenberg-damped Gauss-Newton over ``(rx, ry, rz, tx, ty, tz)``. Accepted
    costs never increase; on the iteration cap the best pose so far is returned.
    """
    config.validate()
    grid = grid or PixelGrid.like(np.asarray(depth))
    depth = validate_depth(depth, grid)
    target = validate_flow(target_flow, grid, name="target flow")
    if weights is not None:
        weights = np.asarray(weights, dtype=np.float64)
        if weights.shape != grid.shape or not np.all(np.isfinite(weights)) or np.any(weights < 0):
            raise InvalidArgumentError("weights must be a finite, non-negative H x W map")
    objective = _Objective(target, intrinsics, depth, grid, weights, near_plane)

    vector = init.to_vector()
    residual = objective.residual(vector)
    cost = float(residual @ residual)
    if not np.isfinite(cost):
        raise InvalidArgumentError("initial reprojection cost is not finite")
    history = [cost]
    if cost == 0:
        return RefineResult(init, cost, 0, True, history)

    damping = config.damping
    converged = False
    iterations = 0
    while iterations < config.max_iters and not converged:
        iterations += 1
        jacobian = objective.jacobian(vector, config.jacobian_step)
        normal = jacobian.T @ jacobian
        gradient = jacobian.T @ residual
        scale = np.maximum(np.diag(normal), 1e-12)
        while damping <= config.max_damping:
            step = np.linalg.solve(normal + damping * np.diag(scale), -gradient)
            trial = vector + step
            if not np.all(np.isfinite(trial)):
                damping *= config.damping_factor
                continue
            try:
                trial_residual = objective.residual(trial)
            except BehindCameraError as exc:
                logger.debug("rejected step into an invalid pose: %s", exc)
                damping *= config.damping_factor
                continue
            trial_cost = float(trial_residual @ trial_residual)
            if trial_cost < cost:
                decrease = (cost - trial_cost) / cost
                vector, residual, cost = trial, trial_residual, trial_cost
                history.append(cost)
                damping = max(damping / config.damping_factor, 1e-15)
                converged = bool(
                    cost == 0
                    or np.linalg.norm(step) < config.step_tolerance
                    or decrease < config.cost_tolerance
                )
                break
            damping *= config.damping_factor
        else:
            # no damping produces a decrease: the current pose is a minimum to machine precision
            converged = True
    if not converged:
        logger.warning("refinement stopped after %d iterations at cost %.3g", iterations, cost)
    logger.debug("refinement finished after %d iterations, cost %.3g", iterations, cost)
    return RefineResult(
        GlobalPose.from_vector(vector), float(cost), int(iterations), bool(converged), history
    )
