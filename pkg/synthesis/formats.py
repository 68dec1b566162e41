"""
Array file formats and image rendering.

* ``.flo``: Middlebury optical flow. A little-endian float32 sanity value
  202021.25, int32 width, int32 height, then row-major interleaved ``(u, v)``
  float32 pairs.
* ``.pfm``: grayscale portable float map. Header ``Pf\\n<w> <h>\\n<scale>\\n``;
  a negative scale marks a little-endian payload, rows run bottom to top.
* bilevel PNG masks, flow color wheel images and scalar heat maps.
"""

import re
from pathlib import Path

import numpy as np
from matplotlib import colormaps
from PIL import Image

from .exceptions import FormatError, InvalidArgumentError

FLO_MAGIC = np.float32(202021.25)
FLO_HEADER_BYTES = 12
PFM_HEADER = re.compile(rb"\APf\n(\d+) (\d+)\n([^\n]+)\n")


def write_flow(path, flow):
    flow = np.asarray(flow)
    if flow.ndim != 3 or flow.shape[-1] != 2:
        raise InvalidArgumentError(f"flow must be H x W x 2, got {flow.shape}")
    if not np.all(np.isfinite(flow)):
        raise InvalidArgumentError("flow must be finite everywhere")
    height, width = flow.shape[:2]
    payload = b"".join(
        [
            np.array([FLO_MAGIC], dtype="<f4").tobytes(),
            np.array([width, height], dtype="<i4").tobytes(),
            np.ascontiguousarray(flow, dtype="<f4").tobytes(),
        ]
    )
    Path(path).write_bytes(payload)


def read_flow(path, shape=None):
    """Read a ``.flo`` file; ``shape`` optionally pins the expected ``(H, W)``."""
    data = Path(path).read_bytes()
    if len(data) < FLO_HEADER_BYTES:
        raise FormatError("truncated header", offset=len(data), path=path)
    magic = np.frombuffer(data, dtype="<f4", count=1)[0]
    if magic != FLO_MAGIC:
        raise FormatError(f"bad sanity value {magic!r}", offset=0, path=path)
    width, height = (int(v) for v in np.frombuffer(data, dtype="<i4", count=2, offset=4))
    if width <= 0 or height <= 0:
        raise FormatError(f"invalid dimensions {width}x{height}", offset=4, path=path)
    if shape is not None and (height, width) != tuple(shape):
        raise FormatError(
            f"dimensions {height}x{width} do not match expected {shape[0]}x{shape[1]}",
            offset=4,
            path=path,
        )
    expected = FLO_HEADER_BYTES + 8 * width * height
    if len(data) < expected:
        raise FormatError("truncated flow payload", offset=len(data), path=path)
    if len(data) > expected:
        raise FormatError("unexpected trailing bytes", offset=expected, path=path)
    flow = np.frombuffer(data, dtype="<f4", offset=FLO_HEADER_BYTES)
    return flow.reshape(height, width, 2).astype(np.float32)


def write_depth(path, depth):
    depth = np.asarray(depth)
    if depth.ndim == 3 and depth.shape[-1] == 1:
        depth = depth[..., 0]
    if depth.ndim != 2:
        raise InvalidArgumentError(f"depth must be H x W, got {depth.shape}")
    if not np.all(np.isfinite(depth)):
        raise InvalidArgumentError("depth must be finite everywhere")
    height, width = depth.shape
    header = f"Pf\n{width} {height}\n-1.0\n".encode("ascii")
    payload = np.ascontiguousarray(np.flipud(depth), dtype="<f4").tobytes()
    Path(path).write_bytes(header + payload)


def read_depth(path, shape=None):
    data = Path(path).read_bytes()
    match = PFM_HEADER.match(data)
    if match is None:
        raise FormatError("not a grayscale PFM header", offset=0, path=path)
    width, height = int(match.group(1)), int(match.group(2))
    if width <= 0 or height <= 0:
        raise FormatError(f"invalid dimensions {width}x{height}", offset=3, path=path)
    if shape is not None and (height, width) != tuple(shape):
        raise FormatError(
            f"dimensions {height}x{width} do not match expected {shape[0]}x{shape[1]}",
            offset=3,
            path=path,
        )
    try:
        scale = float(match.group(3))
    except ValueError:
        raise FormatError("invalid scale", offset=match.start(3), path=path) from None
    if scale == 0:
        raise FormatError("scale must be non-zero", offset=match.start(3), path=path)
    start = match.end()
    expected = start + 4 * width * height
    if len(data) < expected:
        raise FormatError("truncated depth payload", offset=len(data), path=path)
    if len(data) > expected:
        raise FormatError("unexpected trailing bytes", offset=expected, path=path)
    dtype = "<f4" if scale < 0 else ">f4"
    rows = np.frombuffer(data, dtype=dtype, offset=start).reshape(height, width)
    return np.flipud(rows).astype(np.float32)


def write_mask(path, mask):
    mask = np.asarray(mask, dtype=bool)
    Image.fromarray(mask).save(path, format="PNG")


def read_mask(path, shape=None):
    try:
        with Image.open(path) as image:
            mask = np.array(image.convert("L")) > 127
    except OSError as exc:
        if Path(path).exists():
            raise FormatError(f"unreadable mask image ({exc})", path=path) from exc
        raise
    if shape is not None and mask.shape != tuple(shape):
        raise FormatError(f"mask shape {mask.shape} does not match {tuple(shape)}", path=path)
    return mask


def save_png(path, image):
    Image.fromarray(np.asarray(image, dtype=np.uint8)).save(path, format="PNG")


def make_color_wheel():
    """Middlebury color wheel: 55 hues from red through yellow, green, cyan, blue, magenta."""
    segments = [(15, 0, 1), (6, 1, 0), (4, 1, 2), (11, 2, 1), (13, 2, 0), (6, 0, 2)]
    wheel = []
    for length, full, varying in segments:
        block = np.zeros((length, 3))
        ramp = np.floor(255 * np.arange(length) / length)
        block[:, full] = 255
        # rising ramps toward a new primary, falling ramps away from the old one
        block[:, varying] = ramp if (full, varying) in {(0, 1), (1, 2), (2, 0)} else 255 - ramp
        wheel.append(block)
    return np.concatenate(wheel) / 255.0


def visualize_flow(flow, max_magnitude=None):
    """Render a flow map with the standard color wheel as an 8-bit RGB image.

    Hue encodes direction and saturation encodes magnitude relative to
    ``max_magnitude`` (default: the map's 99th magnitude percentile). Zero flow
    is white; vectors beyond the normalizer render at full saturation.
    """
    flow = np.asarray(flow, dtype=np.float64)
    if flow.ndim != 3 or flow.shape[-1] != 2:
        raise InvalidArgumentError(f"flow must be H x W x 2, got {flow.shape}")
    u, v = flow[..., 0], flow[..., 1]
    magnitude = np.hypot(u, v)
    if max_magnitude is None:
        max_magnitude = float(np.percentile(magnitude, 99))
    if not max_magnitude > 0:
        max_magnitude = 1.0
    radius = np.minimum(magnitude / max_magnitude, 1.0)

    wheel = make_color_wheel()
    count = wheel.shape[0]
    angle = np.arctan2(-v, -u) / np.pi
    position = (angle + 1) / 2 * (count - 1)
    lower = np.floor(position).astype(int)
    upper = (lower + 1) % count
    fraction = (position - lower)[..., None]
    color = (1 - fraction) * wheel[lower] + fraction * wheel[upper]
    color = 1 - radius[..., None] * (1 - color)
    return np.floor(255 * color + 0.5).astype(np.uint8)


def visualize_scalar(values, cmap="magma", limits=None):
    """Render a scalar map through a matplotlib colormap as 8-bit RGB."""
    values = np.asarray(values, dtype=np.float64)
    if values.ndim == 3:
        values = values.mean(axis=-1)
    low, high = limits if limits is not None else (np.min(values), np.max(values))
    span = high - low if high > low else 1.0
    normalized = np.clip((values - low) / span, 0.0, 1.0)
    rgba = colormaps[cmap](normalized)
    return np.floor(255 * rgba[..., :3] + 0.5).astype(np.uint8)
