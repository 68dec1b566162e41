"""
Pixel-wise camera motion from a flow map and a depth map.

Every pixel owns a ``k_w x k_w`` window. The window's flow is first fitted with
the instantaneous motion field (a linear least-squares problem in the
translation and rotation) and the fit is then polished by damped Gauss-Newton
on the exact rigid-motion model. The log-variance of each parameter combines
the window residual, the disagreement of the pixel's hypothesis with the rest
of the image and the parameter covariance of the window fit. With
``EstimatorConfig.context_residual`` off only the window residual and the
covariance remain.

Parameters are ordered ``(tx, ty, tz, rx, ry, rz)`` throughout this module.
"""

import logging
from dataclasses import replace

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from synthesis import geometry
from synthesis.exceptions import InvalidArgumentError
from synthesis.models import PixelGrid, validate_depth, validate_flow

from .models import LOG_VARIANCE_LIMIT, EstimatorConfig, MotionFieldDesign, PixelwisePose

logger = logging.getLogger(__name__)

DEFAULT_ESTIMATOR = EstimatorConfig()
# end-point discrepancy assigned to sample points a hypothesis moves behind the camera
CONTEXT_CAP = 1e6


def motion_field_design(intrinsics, depth, grid=None) -> MotionFieldDesign:
    """First-order flow of a small motion ``(translation, rotation)`` at every pixel."""
    grid = grid or PixelGrid.like(np.asarray(depth))
    depth = validate_depth(depth, grid)
    rays = geometry.backproject(grid, intrinsics)
    x, y = rays[..., 0], rays[..., 1]
    fx, fy = intrinsics.fx, intrinsics.fy
    zeros = np.zeros(grid.shape)
    matrices = np.stack(
        [
            np.stack(
                [fx / depth, zeros, -fx * x / depth, -fx * x * y, fx * (1 + x**2), -fx * y],
                axis=-1,
            ),
            np.stack(
                [zeros, fy / depth, -fy * y / depth, -fy * (1 + y**2), fy * x * y, fy * x],
                axis=-1,
            ),
        ],
        axis=-2,
    )
    return MotionFieldDesign(matrices)


def _window_starts(size, window):
    return np.clip(np.arange(size) - window // 2, 0, size - window)


def _window_sums(values, window):
    """Sums over every ``window x window`` block; shape ``(H-k+1, W-k+1, ...)``."""
    view = sliding_window_view(values, (window, window), axis=(0, 1))
    return view.sum(axis=(-2, -1))


def _solve(lhs, rhs):
    try:
        return np.linalg.solve(lhs, rhs[..., None])[..., 0]
    except np.linalg.LinAlgError:
        return (np.linalg.pinv(lhs) @ rhs[..., None])[..., 0]


def _predict(theta, rays, inv_depth, fx, fy, jacobian=False):
    """Exact flow of the hypotheses ``theta`` (N x 6) at rays (N x P x 3).

    Points are scaled by their inverse depth, so a zero motion reproduces each
    ray exactly and predicts exactly zero flow.
    """
    rotation = geometry.rotation_matrices(theta[:, 3:])
    moved = np.einsum("nij,npj->npi", rotation, rays)
    moved = moved + theta[:, None, :3] * inv_depth[..., None]
    z = moved[..., 2]
    behind = ~(z > 0)
    z = np.where(behind, 1.0, z)
    flow = np.stack(
        [fx * (moved[..., 0] / z - rays[..., 0]), fy * (moved[..., 1] / z - rays[..., 1])],
        axis=-1,
    )
    if not jacobian:
        return flow, behind, None
    projection = np.zeros(z.shape + (2, 3))
    projection[..., 0, 0] = fx / z
    projection[..., 0, 2] = -fx * moved[..., 0] / z**2
    projection[..., 1, 1] = fy / z
    projection[..., 1, 2] = -fy * moved[..., 1] / z**2
    derivatives = geometry.rotation_derivatives(theta[:, 3:])
    moved_by_angle = np.einsum("nkij,npj->npik", derivatives, rays)
    result = np.empty(z.shape + (2, 6))
    result[..., :3] = projection * inv_depth[..., None, None]
    result[..., 3:] = projection @ moved_by_angle
    return flow, behind, result


def _cost(observed, predicted, behind):
    cost = np.sum((observed - predicted) ** 2, axis=(-2, -1))
    return np.where(behind.any(axis=-1), np.inf, cost)


def _polish(theta, rays, inv_depth, observed, fx, fy, config):
    """Levenberg-Marquardt on the exact model, one independent problem per row."""
    count = theta.shape[0]
    predicted, behind, jac = _predict(theta, rays, inv_depth, fx, fy, jacobian=True)
    cost = _cost(observed, predicted, behind)
    mu = np.full(count, config.initial_damping)
    eye = np.eye(6)
    for _ in range(config.iterations):
        active = cost > 0
        if not active.any():
            break
        flat = jac.reshape(count, -1, 6)
        residual = (observed - predicted).reshape(count, -1)
        normal = np.einsum("nai,naj->nij", flat, flat)
        gradient = np.einsum("nai,na->ni", flat, residual)
        scale = np.maximum(np.diagonal(normal, axis1=1, axis2=2), 1e-12)
        lhs = normal + mu[:, None, None] * scale[:, :, None] * eye
        step = _solve(lhs, gradient)
        usable = active & np.all(np.isfinite(step), axis=1)
        candidate = theta + np.where(usable[:, None], step, 0.0)
        usable &= np.all(np.isfinite(candidate), axis=1)
        candidate = np.where(usable[:, None], candidate, theta)
        trial, trial_behind, trial_jac = _predict(candidate, rays, inv_depth, fx, fy, jacobian=True)
        trial_cost = _cost(observed, trial, trial_behind)
        accept = usable & (trial_cost < cost)
        theta = np.where(accept[:, None], candidate, theta)
        predicted = np.where(accept[:, None, None], trial, predicted)
        jac = np.where(accept[:, None, None, None], trial_jac, jac)
        cost = np.where(accept, trial_cost, cost)
        mu = np.clip(np.where(accept, mu / 10, mu * 10), 1e-12, 1e12)
    return theta, cost, jac


def _context_residual(theta, sample_rays, sample_inv_depth, sample_flow, fx, fy):
    """Median end-point discrepancy of each hypothesis over the image sample."""
    count = theta.shape[0]
    rays = np.broadcast_to(sample_rays, (count,) + sample_rays.shape)
    inv_depth = np.broadcast_to(sample_inv_depth, (count,) + sample_inv_depth.shape)
    predicted, behind, _ = _predict(theta, rays, inv_depth, fx, fy)
    discrepancy = np.linalg.norm(sample_flow - predicted, axis=-1)
    discrepancy = np.where(behind | ~np.isfinite(discrepancy), CONTEXT_CAP, discrepancy)
    return np.median(np.minimum(discrepancy, CONTEXT_CAP), axis=-1)


def _sample_indices(grid, samples):
    stride = max(1, int(np.sqrt(grid.size / samples)))
    rows = np.arange(stride // 2, grid.height, stride)
    cols = np.arange(stride // 2, grid.width, stride)
    return (rows[:, None] * grid.width + cols[None, :]).ravel()


def estimate_pixelwise(
    total_flow, depth, intrinsics, grid=None, window=None, config=DEFAULT_ESTIMATOR
) -> PixelwisePose:
    """Fit a camera motion and its log-variance at every pixel of ``total_flow``.

    Windows near the border are shifted inward so each keeps ``k_w**2`` pixels.
    Windows whose normal equations are rank deficient get a zero pose and the
    maximal log-variance; the result is always finite.
    """
    if window is not None:
        config = replace(config, window=int(window))
    config.validate()
    grid = grid or PixelGrid.like(np.asarray(depth))
    depth = validate_depth(depth, grid)
    flow = validate_flow(total_flow, grid, name="total flow")
    k = config.window
    if k > min(grid.shape):
        raise InvalidArgumentError(f"window {k} does not fit a {grid.height}x{grid.width} map")

    design = motion_field_design(intrinsics, depth, grid).matrices
    normal = _window_sums(np.einsum("hwai,hwaj->hwij", design, design), k)
    moment = _window_sums(np.einsum("hwai,hwa->hwi", design, flow), k)
    row_starts = _window_starts(grid.height, k)
    col_starts = _window_starts(grid.width, k)
    normal = normal[row_starts[:, None], col_starts[None, :]].reshape(-1, 6, 6)
    moment = moment[row_starts[:, None], col_starts[None, :]].reshape(-1, 6)
    normal = normal + config.damping * np.eye(6)

    degenerate = ~(np.linalg.cond(normal) <= config.max_condition)
    theta = _solve(np.where(degenerate[:, None, None], np.eye(6), normal), moment)
    degenerate |= ~np.all(np.isfinite(theta), axis=1)
    theta[degenerate] = 0.0

    rays = geometry.backproject(grid, intrinsics).reshape(-1, 3)
    inv_depth = 1.0 / depth.ravel()
    observed = flow.reshape(-1, 2)
    offsets = (np.arange(k)[:, None] * grid.width + np.arange(k)[None, :]).ravel()
    starts = (row_starts[:, None] * grid.width + col_starts[None, :]).ravel()
    sample = _sample_indices(grid, config.context_samples)

    log_var = np.full((grid.size, 6), LOG_VARIANCE_LIMIT)
    fx, fy = intrinsics.fx, intrinsics.fy
    for begin in range(0, grid.size, config.chunk_size):
        chunk = np.arange(begin, min(begin + config.chunk_size, grid.size))
        chunk = chunk[~degenerate[chunk]]
        if chunk.size == 0:
            continue
        members = starts[chunk, None] + offsets[None, :]
        polished, cost, jac = _polish(
            theta[chunk], rays[members], inv_depth[members], observed[members], fx, fy, config
        )
        flat = jac.reshape(chunk.size, -1, 6)
        covariance = np.linalg.pinv(np.einsum("nai,naj->nij", flat, flat) + config.damping * np.eye(6))
        variance = np.diagonal(covariance, axis1=1, axis2=2)
        residual = cost / offsets.size + config.epsilon
        if config.context_residual:
            context = _context_residual(
                np.where(np.isfinite(polished), polished, 0.0),
                rays[sample],
                inv_depth[sample],
                observed[sample],
                fx,
                fy,
            )
            residual = residual + context**2
        with np.errstate(divide="ignore", invalid="ignore"):
            values = np.log(residual)[:, None] + np.log(variance)
        failed = ~np.all(np.isfinite(polished), axis=1) | ~np.all(np.isfinite(values), axis=1)
        theta[chunk] = np.where(failed[:, None], 0.0, polished)
        log_var[chunk] = np.where(
            failed[:, None], LOG_VARIANCE_LIMIT, np.clip(values, -LOG_VARIANCE_LIMIT, LOG_VARIANCE_LIMIT)
        )
        degenerate[chunk] |= failed

    if degenerate.any():
        logger.warning(
            "%d of %d estimator windows were degenerate", int(degenerate.sum()), grid.size
        )
    shape = grid.shape + (3,)
    return PixelwisePose(
        rotation=theta[:, 3:].reshape(shape),
        translation=theta[:, :3].reshape(shape),
        rotation_log_var=log_var[:, 3:].reshape(shape),
        translation_log_var=log_var[:, :3].reshape(shape),
    )
