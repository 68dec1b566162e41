import numpy as np
import pytest

from odometry.estimator import estimate_pixelwise, motion_field_design
from odometry.models import EstimatorConfig
from synthesis.exceptions import InvalidArgumentError, InvalidConfigError
from synthesis.generator import rigid_flow
from synthesis.models import EulerAngles, Intrinsics, MotionSE3


def test_design_at_principal_point():
    intrinsics = Intrinsics(fx=50.0, fy=40.0, cx=3.0, cy=2.0)
    design = motion_field_design(intrinsics, np.full((5, 7), 4.0))
    np.testing.assert_allclose(design.translational[2, 3], [[12.5, 0, 0], [0, 10.0, 0]])
    np.testing.assert_allclose(design.rotational[2, 3], [[0, 50.0, 0], [-40.0, 0, 0]])


def test_doubling_depth_halves_translational_block(intrinsics, rng):
    depth = rng.uniform(2, 6, size=(8, 9))
    near = motion_field_design(intrinsics, depth)
    far = motion_field_design(intrinsics, 2 * depth)
    np.testing.assert_allclose(far.translational, near.translational / 2)
    np.testing.assert_array_equal(far.rotational, near.rotational)


def test_design_agrees_with_rigid_flow_to_first_order(rng):
    intrinsics = Intrinsics(64.0, 64.0, 15.5, 15.5)
    depth = rng.uniform(4, 8, size=(32, 32))
    design = motion_field_design(intrinsics, depth)
    for _ in range(5):
        rotation = rng.normal(size=3)
        translation = rng.normal(size=3)
        rotation *= 1e-4 / np.linalg.norm(rotation)
        translation *= 1e-4 / np.linalg.norm(translation)
        exact, _ = rigid_flow(
            intrinsics, depth, MotionSE3(EulerAngles(*rotation), tuple(translation))
        )
        linear = design.apply(translation, rotation)
        assert np.max(np.abs(linear - exact)) < 1e-6


def test_zero_flow_gives_zero_pose(intrinsics, rng):
    depth = rng.uniform(2, 8, size=(16, 16))
    pose = estimate_pixelwise(np.zeros((16, 16, 2)), depth, intrinsics)
    np.testing.assert_array_equal(pose.rotation, 0.0)
    np.testing.assert_array_equal(pose.translation, 0.0)
    assert np.all(np.isfinite(pose.translation_log_var))


def test_estimates_are_always_finite_and_clipped(intrinsics, rng):
    depth = np.full((16, 16), 3.0)
    flow = rng.normal(scale=50.0, size=(16, 16, 2))
    pose = estimate_pixelwise(flow, depth, intrinsics)
    for values in pose.as_arrays().values():
        assert np.all(np.isfinite(values))
    assert np.all(np.abs(pose.rotation_log_var) <= 20)
    assert np.all(np.abs(pose.translation_log_var) <= 20)


def test_static_scene_pixels_recover_camera_motion(static_scene):
    pose = estimate_pixelwise(
        static_scene.total_flow, static_scene.depth, static_scene.intrinsics
    )
    motion = static_scene.camera_motion
    rotation_error = np.abs(pose.rotation - motion.rotation.as_array()).max(axis=-1)
    translation_error = np.abs(pose.translation - motion.translation_array).max(axis=-1)
    assert np.median(rotation_error) < 1e-3
    assert np.median(translation_error) < 1e-3


def test_object_pixels_are_more_uncertain(mover_scene):
    pose = estimate_pixelwise(mover_scene.total_flow, mover_scene.depth, mover_scene.intrinsics)
    mask = mover_scene.object_mask
    score = pose.translation_log_var.mean(axis=-1)
    assert score[mask].mean() > score[~mask].mean()


def test_window_override_and_validation(intrinsics):
    depth = np.full((16, 16), 3.0)
    flow = np.zeros((16, 16, 2))
    estimate_pixelwise(flow, depth, intrinsics, window=7)
    with pytest.raises(InvalidConfigError):
        estimate_pixelwise(flow, depth, intrinsics, window=6)
    with pytest.raises(InvalidConfigError):
        estimate_pixelwise(flow, depth, intrinsics, window=3)
    with pytest.raises(InvalidArgumentError):
        estimate_pixelwise(np.zeros((4, 16, 2)), np.ones((4, 16)), intrinsics)


def test_small_chunks_match_single_chunk(static_scene):
    arguments = (static_scene.total_flow, static_scene.depth, static_scene.intrinsics)
    whole = estimate_pixelwise(*arguments)
    chunked = estimate_pixelwise(*arguments, config=EstimatorConfig(chunk_size=97))
    np.testing.assert_allclose(chunked.rotation, whole.rotation, atol=1e-12)
    np.testing.assert_allclose(chunked.translation_log_var, whole.translation_log_var, atol=1e-9)


def test_context_residual_only_raises_log_variance(mover_scene):
    arguments = (mover_scene.total_flow, mover_scene.depth, mover_scene.intrinsics)
    with_context = estimate_pixelwise(*arguments)
    window_only = estimate_pixelwise(*arguments, config=EstimatorConfig(context_residual=False))
    np.testing.assert_array_equal(window_only.translation, with_context.translation)
    np.testing.assert_array_equal(window_only.rotation, with_context.rotation)
    assert np.all(window_only.translation_log_var <= with_context.translation_log_var)
    assert np.any(window_only.translation_log_var < with_context.translation_log_var)
    assert np.all(np.isfinite(window_only.rotation_log_var))
