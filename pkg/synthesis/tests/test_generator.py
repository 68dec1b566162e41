import numpy as np
import pytest

from conftest import STATIC_CONFIG
from synthesis import generator, geometry
from synthesis.exceptions import (
    BehindCameraError,
    GenerationFailedError,
    InvalidArgumentError,
    InvalidConfigError,
)
from synthesis.generator import (
    compose_total_flow,
    generate_batch,
    generate_scene,
    rigid_flow,
    sample_depth,
    sample_intrinsics,
    sample_motions,
    sub_seed,
)
from synthesis.models import EulerAngles, GenerationConfig, Intrinsics, MotionSE3, ObjectSpec, PixelGrid


def homogeneous_flow_oracle(intrinsics, depth, motion):
    """Per-pixel ``K (M (D K^-1 x))`` projection, one pixel at a time."""
    matrix = intrinsics.matrix
    inverse = np.linalg.inv(matrix)
    transform = motion.matrix
    height, width = depth.shape
    flow = np.zeros((height, width, 2))
    for row in range(height):
        for col in range(width):
            pixel = np.array([col, row, 1.0])
            point = np.append(depth[row, col] * (inverse @ pixel), 1.0)
            moved = (transform @ point)[:3]
            image = matrix @ moved
            flow[row, col] = image[:2] / image[2] - pixel[:2]
    return flow


def test_sub_seed_is_deterministic_and_key_dependent():
    assert sub_seed(7, 1) == sub_seed(7, 1)
    assert sub_seed(7, 1) != sub_seed(7, 2)
    assert sub_seed(7, 4, 0) != sub_seed(7, 4, 1)
    assert sub_seed(7, 1) != sub_seed(8, 1)


def test_rigid_flow_matches_homogeneous_oracle(rng):
    for _ in range(20):
        intrinsics = Intrinsics(*rng.uniform([32, 32, 28, 28], [96, 96, 36, 36]))
        depth = rng.uniform(2.0, 10.0, size=(64, 64))
        motion = MotionSE3(
            EulerAngles(*rng.uniform(-0.1, 0.1, size=3)), tuple(rng.uniform(-0.5, 0.5, size=3))
        )
        flow, _ = rigid_flow(intrinsics, depth, motion)
        expected = homogeneous_flow_oracle(intrinsics, depth, motion)
        assert np.max(np.abs(flow - expected)) < 1e-9


def test_identity_motion_gives_exact_zero_flow(intrinsics, rng):
    depth = rng.uniform(1, 5, size=(16, 20))
    flow, moved = rigid_flow(intrinsics, depth, MotionSE3.identity())
    np.testing.assert_array_equal(flow, 0.0)
    np.testing.assert_array_equal(moved, depth)


def test_sideways_translation_moves_pixels_with_it(intrinsics):
    depth = np.full((16, 16), 4.0)
    flow, _ = rigid_flow(intrinsics, depth, MotionSE3(EulerAngles(0, 0, 0), (0.2, 0.0, 0.0)))
    np.testing.assert_allclose(flow[..., 0], intrinsics.fx * 0.2 / 4.0)
    np.testing.assert_allclose(flow[..., 1], 0.0, atol=1e-12)


def test_behind_camera_is_reported_with_pixel(intrinsics):
    depth = np.full((16, 16), 1.0)
    motion = MotionSE3(EulerAngles(0, 0, 0), (0.0, 0.0, -2.0))
    with pytest.raises(BehindCameraError) as info:
        rigid_flow(intrinsics, depth, motion)
    assert info.value.pixel == (0, 0)
    assert info.value.depth == pytest.approx(-1.0)


def test_region_limits_flow_support(intrinsics, small_motion):
    depth = np.full((16, 16), 3.0)
    region = np.zeros((16, 16), dtype=bool)
    region[4:8, 5:9] = True
    flow, moved = rigid_flow(intrinsics, depth, small_motion, region=region)
    full, full_moved = rigid_flow(intrinsics, depth, small_motion)
    np.testing.assert_array_equal(flow[~region], 0.0)
    np.testing.assert_array_equal(flow[region], full[region])
    np.testing.assert_array_equal(moved[region], full_moved[region])


def test_sample_intrinsics_within_ranges():
    intrinsics = sample_intrinsics(3, 40, 60)
    assert 0.5 * 60 <= intrinsics.fx <= 1.5 * 60
    assert 0.4 * 60 <= intrinsics.cx <= 0.6 * 60
    assert 0.4 * 40 <= intrinsics.cy <= 0.6 * 40


def test_sample_depth_is_smooth_and_positive(intrinsics):
    depth = sample_depth(9, 48, 48, intrinsics)
    assert depth.shape == (48, 48)
    assert np.all(depth >= 0.5)
    assert np.max(np.abs(np.diff(depth, axis=1))) < 0.25 * depth.mean()


def test_scene_is_deterministic():
    first = generate_scene(21, 32, 40)
    second = generate_scene(21, 32, 40)
    np.testing.assert_array_equal(first.total_flow, second.total_flow)
    np.testing.assert_array_equal(first.depth, second.depth)
    np.testing.assert_array_equal(first.next_depth, second.next_depth)
    assert first.camera_motion == second.camera_motion
    assert first.seed_trail == second.seed_trail


def test_different_seeds_give_different_scenes():
    assert not np.array_equal(generate_scene(1, 32, 32).total_flow, generate_scene(2, 32, 32).total_flow)


def test_scene_invariants():
    for seed in range(5):
        scene = generate_scene(seed, 32, 32)
        assert scene.depth.shape == (32, 32)
        assert scene.total_flow.shape == (32, 32, 2)
        assert np.all(np.isfinite(scene.total_flow))
        assert np.all(scene.depth >= 0.5)
        assert np.all(scene.next_depth > 0)
        static = ~scene.object_mask
        np.testing.assert_array_equal(scene.total_flow[static], scene.ego_flow[static])
        for item in scene.objects:
            np.testing.assert_array_equal(item.flow[~item.spec.mask], 0.0)


def test_object_free_scene_total_equals_ego(static_scene):
    assert static_scene.objects == []
    np.testing.assert_array_equal(static_scene.total_flow, static_scene.ego_flow)
    expected, _ = rigid_flow(static_scene.intrinsics, static_scene.depth, static_scene.camera_motion)
    np.testing.assert_array_equal(static_scene.ego_flow, expected)


def test_objects_sit_in_front_of_background(mover_scene):
    assert mover_scene.objects
    for item in mover_scene.objects:
        assert item.spec.depth_offset > 0


def test_compose_prefers_nearest_object_and_lowest_index():
    shape = (4, 4)
    ego = (np.zeros(shape + (2,)), np.full(shape, 5.0))
    motion = MotionSE3.identity()
    first = np.zeros(shape, dtype=bool)
    first[:, :2] = True
    second = np.zeros(shape, dtype=bool)
    second[:, 1:3] = True
    third = second.copy()
    layers = [
        (ObjectSpec(first, 1.0, motion), np.full(shape + (2,), 1.0), np.full(shape, 4.0)),
        (ObjectSpec(second, 2.0, motion), np.full(shape + (2,), 2.0), np.full(shape, 3.0)),
        (ObjectSpec(third, 2.0, motion), np.full(shape + (2,), 3.0), np.full(shape, 3.0)),
    ]
    composite = compose_total_flow(ego, layers)
    np.testing.assert_array_equal(composite.total_flow[:, 0], 1.0)
    np.testing.assert_array_equal(composite.total_flow[:, 1:3], 2.0)
    np.testing.assert_array_equal(composite.total_flow[:, 3], 0.0)


def test_zero_flow_splats_depth_in_place(rng):
    depth = rng.uniform(1, 3, size=(8, 8))
    composite = compose_total_flow((np.zeros((8, 8, 2)), depth), [])
    np.testing.assert_array_equal(composite.next_depth, depth)
    assert composite.valid.all()


def test_splat_fills_holes_and_marks_them_invalid():
    depth = np.full((6, 6), 2.0)
    flow = np.zeros((6, 6, 2))
    flow[..., 0] = 1.0
    composite = compose_total_flow((flow, depth), [])
    assert not composite.valid[:, 0].any()
    assert composite.valid[:, 1:].all()
    np.testing.assert_array_equal(composite.next_depth, 2.0)


def test_generation_retries_then_fails(monkeypatch):
    def always_behind(*args, **kwargs):
        raise BehindCameraError((0, 0), 0.1, 0.5)

    monkeypatch.setattr(generator, "rigid_flow", always_behind)
    with pytest.raises(GenerationFailedError):
        generate_scene(0, 16, 16, GenerationConfig(max_attempts=3))


def test_generation_records_retries(monkeypatch):
    calls = {"count": 0}
    original = generator.rigid_flow

    def flaky(*args, **kwargs):
        calls["count"] += 1
        if calls["count"] == 1:
            raise BehindCameraError((0, 0), 0.1, 0.5)
        return original(*args, **kwargs)

    monkeypatch.setattr(generator, "rigid_flow", flaky)
    scene = generate_scene(0, 16, 16, STATIC_CONFIG)
    assert len(scene.seed_trail) == 2


def test_batch_matches_sequential_generation():
    sequential = generate_batch([3, 4, 5], 24, 24, workers=1)
    parallel = generate_batch([3, 4, 5], 24, 24, workers=2)
    for first, second in zip(sequential, parallel):
        assert first.seed == second.seed
        np.testing.assert_array_equal(first.total_flow, second.total_flow)
        np.testing.assert_array_equal(first.next_depth, second.next_depth)


def test_too_small_scene_rejected():
    with pytest.raises(InvalidArgumentError):
        generate_scene(0, 8, 32)


def test_degenerate_config_rejected():
    with pytest.raises(InvalidConfigError):
        generate_scene(0, 32, 32, GenerationConfig(base_depth_range=(5.0, 2.0)))
    with pytest.raises(InvalidConfigError):
        GenerationConfig(object_count_range=(3, 1)).validate()


def test_pixel_grid_coordinates_are_column_row():
    coordinates = PixelGrid(2, 3).coordinates
    np.testing.assert_array_equal(coordinates[1, 2], [2.0, 1.0])


def test_rigid_flow_of_general_motion_is_finite(intrinsics, rng):
    depth = rng.uniform(3.0, 8.0, size=(16, 20))
    motion = MotionSE3(EulerAngles(0.05, -0.04, 0.08), (0.3, -0.2, 0.4))
    flow, moved = rigid_flow(intrinsics, depth, motion)
    assert flow.shape == (16, 20, 2)
    assert np.all(np.isfinite(flow))
    assert np.abs(flow).max() > 0
    assert np.all(moved > 0)


def test_rigid_flow_is_invariant_to_joint_depth_and_translation_scale(rng):
    intrinsics = Intrinsics(40.0, 42.0, 15.5, 16.0)
    depth = rng.uniform(3.0, 9.0, size=(32, 32))
    angles = EulerAngles(0.03, -0.05, 0.02)
    translation = np.array([0.2, -0.1, 0.3])
    flow, moved = rigid_flow(intrinsics, depth, MotionSE3(angles, tuple(translation)))
    for scale in (0.5, 3.0):
        scaled, scaled_moved = rigid_flow(
            intrinsics, depth * scale, MotionSE3(angles, tuple(translation * scale))
        )
        np.testing.assert_allclose(scaled, flow, atol=1e-9)
        np.testing.assert_allclose(scaled_moved, moved * scale, rtol=1e-12)


def test_composed_motion_flow_matches_chained_warps(intrinsics, rng):
    grid = PixelGrid(16, 16)
    depth = rng.uniform(4.0, 8.0, size=grid.shape)
    first = MotionSE3(EulerAngles(0.04, -0.02, 0.05), (0.2, 0.1, -0.3))
    second = MotionSE3(EulerAngles(-0.03, 0.06, -0.01), (-0.1, 0.2, 0.4))
    flow, moved = rigid_flow(intrinsics, depth, second.compose(first), grid)

    rays = geometry.backproject(grid, intrinsics)
    once = geometry.transform_points(first, rays, depth)
    twice = geometry.transform_points(second, once, np.ones(grid.shape))
    chained = geometry.project(intrinsics, twice) - grid.coordinates
    np.testing.assert_allclose(flow, chained, atol=1e-6)
    np.testing.assert_allclose(moved, twice[..., 2], atol=1e-9)


def test_pure_roll_leaves_principal_point_still():
    intrinsics = Intrinsics(20.0, 20.0, 8.0, 8.0)
    depth = np.full((16, 16), 5.0)
    flow, _ = rigid_flow(intrinsics, depth, MotionSE3(EulerAngles(0.0, 0.0, 0.3), (0.0, 0.0, 0.0)))
    np.testing.assert_allclose(flow[8, 8], 0.0, atol=1e-12)
    assert np.abs(flow).max() > 1.0


def test_sample_motions_respects_limits():
    config = GenerationConfig()
    for seed in range(20):
        camera, objects = sample_motions(seed, 5, config)
        assert len(objects) == 5
        assert np.all(np.abs(camera.rotation.as_array()) <= config.camera_rotation)
        assert np.all(np.abs(camera.translation_array) <= config.camera_translation)
        for motion in objects:
            assert np.all(np.abs(motion.rotation.as_array()) <= config.object_rotation)
            assert np.all(np.abs(motion.translation_array) <= config.object_translation)


def test_sample_motions_without_objects():
    camera, objects = sample_motions(4, 0)
    assert objects == []
    assert not camera.is_identity


def test_sample_motions_rejects_object_count_out_of_range():
    with pytest.raises(InvalidArgumentError):
        sample_motions(4, 6)
    with pytest.raises(InvalidArgumentError):
        sample_motions(4, -1)


def test_sample_motions_is_deterministic():
    assert sample_motions(11, 3) == sample_motions(11, 3)
    assert sample_motions(11, 3) != sample_motions(12, 3)


def test_sample_depth_without_noise_is_constant(intrinsics):
    depth = sample_depth(5, 24, 24, intrinsics, GenerationConfig(noise_amplitude=0.0))
    assert np.all(depth == depth[0, 0])
    assert 4.0 <= depth[0, 0] <= 12.0


def test_seed_zero_replays_documented_draws():
    config = GenerationConfig(noise_amplitude=0.0)
    scene = generate_scene(0, 32, 48, config)

    rng = np.random.default_rng(sub_seed(0, 1))
    expected = Intrinsics(
        rng.uniform(0.5 * 48, 1.5 * 48),
        rng.uniform(0.5 * 48, 1.5 * 48),
        rng.uniform(0.4 * 48, 0.6 * 48),
        rng.uniform(0.4 * 32, 0.6 * 32),
    )
    assert scene.intrinsics == expected

    base = np.random.default_rng(sub_seed(0, 2)).uniform(4.0, 12.0)
    background = ~scene.object_mask
    np.testing.assert_array_equal(scene.depth[background], base)

    rng = np.random.default_rng(scene.seed_trail[-1])
    assert scene.seed_trail[-1] == sub_seed(0, 4, len(scene.seed_trail) - 1)
    angles = rng.uniform(-0.1, 0.1, size=3)
    shift = rng.uniform(-0.5, 0.5, size=3)
    assert scene.camera_motion == MotionSE3(EulerAngles(*angles.tolist()), tuple(shift.tolist()))


@pytest.mark.slow
def test_hundred_default_scenes_generate_without_failure():
    scenes = generate_batch(range(100), 64, 64)
    assert len(scenes) == 100
    for seed, scene in enumerate(scenes):
        assert scene.seed == seed
        assert np.all(np.isfinite(scene.total_flow))
