"""
Synthetic rigid-flow scene generator.

A scene is built in five steps: sample intrinsics, sample a background depth
map, sample the camera and object motions, render a rigid flow map for every
motion, and composite the maps into the total flow and the next-frame depth.
Every step draws from its own seeded generator so a scene is a pure function of
``(seed, height, width, config)``.
"""

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from typing import List, NamedTuple, Optional, Sequence, Tuple

import numpy as np
from scipy import ndimage

from . import geometry
from .exceptions import BehindCameraError, GenerationFailedError, InvalidArgumentError
from .models import (
    NEAR_PLANE,
    EulerAngles,
    GenerationConfig,
    Intrinsics,
    MotionSE3,
    ObjectFlow,
    ObjectSpec,
    PixelGrid,
    SceneSample,
    validate_depth,
    validate_flow,
)

logger = logging.getLogger(__name__)

MIN_SIZE = 16
DEFAULT_CONFIG = GenerationConfig()

# spawn keys of the per-step generators
STEP_INTRINSICS, STEP_DEPTH, STEP_OBJECTS, STEP_MOTIONS = 1, 2, 3, 4


class CompositeFlow(NamedTuple):
    total_flow: np.ndarray
    next_depth: np.ndarray
    valid: np.ndarray


class ObjectRegion(NamedTuple):
    mask: np.ndarray
    depth_offset: float


def sub_seed(seed: int, *key: int) -> int:
    """Deterministic 64-bit child seed of ``seed`` for the given spawn key."""
    sequence = np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in key))
    return int(sequence.generate_state(1, dtype=np.uint64)[0])


def _check_size(height, width):
    if height < MIN_SIZE or width < MIN_SIZE:
        raise InvalidArgumentError(
            f"scenes must be at least {MIN_SIZE}x{MIN_SIZE}, got {height}x{width}"
        )


def sample_intrinsics(rng_seed, height, width, config=DEFAULT_CONFIG) -> Intrinsics:
    _check_size(height, width)
    config.validate()
    rng = np.random.default_rng(rng_seed)
    low, high = config.focal_range
    fx = rng.uniform(low * width, high * width)
    fy = rng.uniform(low * width, high * width)
    cx = rng.uniform(config.cx_range[0] * width, config.cx_range[1] * width)
    cy = rng.uniform(config.cy_range[0] * height, config.cy_range[1] * height)
    return Intrinsics(float(fx), float(fy), float(cx), float(cy))


def _value_noise(rng, height, width, cell, octaves):
    """Sum of bilinear value-noise octaves in ``[-1, 1]``."""
    rows, cols = np.meshgrid(
        np.arange(height, dtype=np.float64),
        np.arange(width, dtype=np.float64),
        indexing="ij",
    )
    weights = 0.5 ** np.arange(octaves)
    weights /= weights.sum()
    noise = np.zeros((height, width))
    for octave, weight in enumerate(weights):
        spacing = max(cell / 2**octave, 1.0)
        lattice = rng.uniform(
            -1.0,
            1.0,
            size=(int(math.ceil(height / spacing)) + 2, int(math.ceil(width / spacing)) + 2),
        )
        coordinates = np.stack([rows / spacing, cols / spacing])
        noise += weight * ndimage.map_coordinates(lattice, coordinates, order=1)
    return noise


def sample_depth(rng_seed, height, width, intrinsics, config=DEFAULT_CONFIG):
    """Smooth positive background depth whose structure scales with ``fx``."""
    _check_size(height, width)
    config.validate()
    rng = np.random.default_rng(rng_seed)
    base = rng.uniform(*config.base_depth_range)
    noise = _value_noise(
        rng, height, width, config.noise_cell * intrinsics.fx, config.noise_octaves
    )
    depth = base * (1.0 + config.noise_amplitude * noise)
    return np.maximum(depth, config.near_plane)


def _uniform_motion(rng, rotation, translation) -> MotionSE3:
    angles = rng.uniform(-rotation, rotation, size=3)
    shift = rng.uniform(-translation, translation, size=3)
    return MotionSE3(EulerAngles(*angles.tolist()), tuple(shift.tolist()))


def sample_motions(
    rng_seed, n_objects, config=DEFAULT_CONFIG
) -> Tuple[MotionSE3, List[MotionSE3]]:
    config.validate()
    if not 0 <= n_objects <= config.max_objects:
        raise InvalidArgumentError(
            f"n_objects must lie in [0, {config.max_objects}], got {n_objects}"
        )
    rng = np.random.default_rng(rng_seed)
    camera = _uniform_motion(rng, config.camera_rotation, config.camera_translation)
    objects = [
        _uniform_motion(rng, config.object_rotation, config.object_translation)
        for _ in range(n_objects)
    ]
    return camera, objects


def sample_object_regions(
    rng_seed, background, n_objects, config=DEFAULT_CONFIG
) -> List[ObjectRegion]:
    """Random axis-aligned ellipses, each pushed toward the camera by an offset."""
    config.validate()
    height, width = background.shape
    rng = np.random.default_rng(rng_seed)
    rows, cols = np.meshgrid(np.arange(height), np.arange(width), indexing="ij")
    size = min(height, width)
    regions = []
    for _ in range(n_objects):
        center_col = rng.uniform(0, width - 1)
        center_row = rng.uniform(0, height - 1)
        radius_col, radius_row = rng.uniform(*config.object_radius_range, size=2) * size
        mask = ((cols - center_col) / radius_col) ** 2 + (
            (rows - center_row) / radius_row
        ) ** 2 <= 1.0
        mask[int(round(center_row)), int(round(center_col))] = True
        headroom = float(background[mask].min()) - config.near_plane
        offset = rng.uniform(*config.object_offset_range) * headroom
        regions.append(ObjectRegion(mask, float(offset)))
    return regions


def rigid_flow(
    intrinsics,
    depth,
    motion,
    grid: Optional[PixelGrid] = None,
    near_plane=NEAR_PLANE,
    region=None,
):
    """Flow induced by moving every backprojected pixel with ``motion``.

    Returns ``(flow, transformed_depth)`` where the transformed depth is the
    z-component of each source pixel's moved point. When ``region`` is given the
    flow is only evaluated (and checked against the near plane) inside it and
    is zero elsewhere.
    """
    grid = grid or PixelGrid.like(np.asarray(depth))
    depth = validate_depth(depth, grid)
    if motion.is_identity:
        return np.zeros(grid.shape + (2,)), depth.copy()
    rays = geometry.backproject(grid, intrinsics)
    points = geometry.transform_points(motion, rays, depth)
    z = points[..., 2]
    checked = np.ones(grid.shape, dtype=bool) if region is None else region
    behind = checked & ~(z >= near_plane)
    if behind.any():
        row, col = np.argwhere(behind)[0]
        raise BehindCameraError((row, col), z[row, col], near_plane)
    safe = np.where(checked[..., None], points, np.array([0.0, 0.0, 1.0]))
    flow = geometry.project(intrinsics, safe) - grid.coordinates
    if region is not None:
        flow[~region] = 0.0
        z = np.where(region, z, depth)
    return flow, z


def _splat(flow, moved_depth):
    """Forward-splat moved depths with a z-buffer; returns ``(depth, valid)``."""
    height, width = moved_depth.shape
    grid = PixelGrid(height, width).coordinates
    target = np.rint(grid + flow).astype(np.int64)
    inside = (
        (target[..., 0] >= 0)
        & (target[..., 0] < width)
        & (target[..., 1] >= 0)
        & (target[..., 1] < height)
    )
    source_index = np.flatnonzero(inside)
    target_index = (target[..., 1] * width + target[..., 0])[inside]
    z = moved_depth[inside]
    next_depth = np.zeros(height * width)
    valid = np.zeros(height * width, dtype=bool)
    if source_index.size:
        order = np.lexsort((source_index, z, target_index))
        first = np.unique(target_index[order], return_index=True)[1]
        winners = order[first]
        next_depth[target_index[winners]] = z[winners]
        valid[target_index[winners]] = True
    next_depth = next_depth.reshape(height, width)
    valid = valid.reshape(height, width)
    if not valid.any():
        logger.warning("no moved point landed inside the frame; next depth is unwarped")
        return moved_depth.copy(), valid
    if not valid.all():
        nearest = ndimage.distance_transform_edt(
            ~valid, return_distances=False, return_indices=True
        )
        next_depth = next_depth[nearest[0], nearest[1]]
    return next_depth, valid


def compose_total_flow(ego, objects: Sequence) -> CompositeFlow:
    """Composite ego and object flows by frame-t depth ordering.

    ``ego`` is ``(flow, transformed_depth)``; ``objects`` holds
    ``(ObjectSpec, flow, transformed_depth)`` triples. A pixel takes the flow of
    the nearest surface at frame t; objects sit in front of the background by
    their depth offset and ties between objects go to the lowest index.
    """
    ego_flow, ego_depth = ego
    ego_flow = validate_flow(ego_flow)
    grid = PixelGrid.like(ego_flow)
    ego_depth = validate_depth(ego_depth, grid, name="ego transformed depth")
    owner = np.full(grid.shape, -1)
    best_offset = np.zeros(grid.shape)
    for index, (spec, _, _) in enumerate(objects):
        if spec.mask.shape != grid.shape:
            raise InvalidArgumentError(
                f"object {index} mask shape {spec.mask.shape} does not match {grid.shape}"
            )
        closer = spec.mask & (spec.depth_offset > best_offset)
        owner[closer] = index
        best_offset[closer] = spec.depth_offset
    total_flow = ego_flow.copy()
    moved_depth = ego_depth.copy()
    for index, (_, flow, depth) in enumerate(objects):
        owned = owner == index
        total_flow[owned] = np.asarray(flow, dtype=np.float64)[owned]
        moved_depth[owned] = np.asarray(depth, dtype=np.float64)[owned]
    next_depth, valid = _splat(total_flow, moved_depth)
    return CompositeFlow(total_flow, next_depth, valid)


def generate_scene(seed, height, width, config=DEFAULT_CONFIG) -> SceneSample:
    config.validate()
    _check_size(height, width)
    grid = PixelGrid(height, width)

    intrinsics = sample_intrinsics(sub_seed(seed, STEP_INTRINSICS), height, width, config)
    background = sample_depth(sub_seed(seed, STEP_DEPTH), height, width, intrinsics, config)

    object_rng = np.random.default_rng(sub_seed(seed, STEP_OBJECTS))
    low, high = config.object_count_range
    n_objects = int(object_rng.integers(low, high, endpoint=True))
    regions = sample_object_regions(
        sub_seed(seed, STEP_OBJECTS, 1), background, n_objects, config
    )
    depth = background.copy()
    object_depths = []
    for region in regions:
        object_depth = np.where(region.mask, background - region.depth_offset, depth)
        object_depths.append(object_depth)
        depth = np.where(region.mask, np.minimum(depth, object_depth), depth)

    trail = []
    for attempt in range(config.max_attempts):
        motion_seed = sub_seed(seed, STEP_MOTIONS, attempt)
        trail.append(motion_seed)
        camera, motions = sample_motions(motion_seed, n_objects, config)
        try:
            ego = rigid_flow(intrinsics, depth, camera, grid, config.near_plane)
            layers = []
            for region, object_depth, motion in zip(regions, object_depths, motions):
                flow, moved = rigid_flow(
                    intrinsics, object_depth, motion, grid, config.near_plane, region.mask
                )
                layers.append((ObjectSpec(region.mask, region.depth_offset, motion), flow, moved))
        except BehindCameraError as exc:
            logger.debug("scene %s attempt %d rejected: %s", seed, attempt, exc)
            continue
        break
    else:
        raise GenerationFailedError(
            f"scene {seed}: every one of {config.max_attempts} motion samples "
            "moved a point behind the near plane"
        )

    composite = compose_total_flow(ego, layers)
    return SceneSample(
        intrinsics=intrinsics,
        depth=depth,
        next_depth=composite.next_depth,
        next_depth_valid=composite.valid,
        total_flow=composite.total_flow,
        ego_flow=ego[0],
        objects=[ObjectFlow(spec, flow) for spec, flow, _ in layers],
        camera_motion=camera,
        seed=int(seed),
        seed_trail=trail,
    )


def _generate_one(arguments):
    return generate_scene(*arguments)


def generate_batch(seeds, height, width, config=DEFAULT_CONFIG, workers=1):
    """Generate one scene per seed, in seed order, optionally in parallel."""
    jobs = [(seed, height, width, config) for seed in seeds]
    if workers <= 1 or len(jobs) <= 1:
        return [_generate_one(job) for job in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_generate_one, jobs))
