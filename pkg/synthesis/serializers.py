"""
Scene manifests: the JSON description of a generated scene plus the array
files it references, all stored in one directory.
"""

import json
import logging
from pathlib import Path

import numpy as np
from rest_framework import serializers

from . import formats
from .exceptions import FormatError, InvalidArgumentError, OutputExistsError
from .models import EulerAngles, Intrinsics, MotionSE3, ObjectFlow, ObjectSpec, SceneSample

logger = logging.getLogger(__name__)

SCHEMA_VERSION = 1
MANIFEST_NAME = "manifest.json"

SCENE_FILES = {
    "depth": "depth.pfm",
    "next_depth": "next_depth.pfm",
    "next_depth_valid": "next_depth_valid.png",
    "total_flow": "total_flow.flo",
    "ego_flow": "ego_flow.flo",
}


def render_json(data):
    return json.dumps(data, indent=2, sort_keys=True) + "\n"


def dump_json(path, data):
    Path(path).write_text(render_json(data), encoding="utf-8")


def load_json(path):
    path = Path(path)
    try:
        return json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise FormatError(f"invalid JSON ({exc.msg})", offset=exc.pos, path=path) from exc


def describe_errors(errors, prefix=""):
    """Flatten nested serializer errors into ``field.path: message`` strings."""
    if isinstance(errors, dict):
        messages = []
        for key, value in errors.items():
            messages += describe_errors(value, f"{prefix}{key}.")
        return messages
    if isinstance(errors, list) and all(isinstance(item, str) for item in errors):
        return [f"{prefix.rstrip('.') or 'manifest'}: {' '.join(errors)}"] if errors else []
    if isinstance(errors, list):
        messages = []
        for index, value in enumerate(errors):
            messages += describe_errors(value, f"{prefix}{index}.")
        return messages
    return [f"{prefix.rstrip('.')}: {errors}"]


def validated(serializer, path):
    """Run ``serializer.is_valid()`` and turn its errors into a :class:`FormatError`."""
    if not serializer.is_valid():
        raise FormatError("; ".join(describe_errors(serializer.errors)), path=path)
    return serializer


class Vector3Field(serializers.ListField):
    child = serializers.FloatField()

    def __init__(self, **kwargs):
        super().__init__(min_length=3, max_length=3, **kwargs)


class IntrinsicsSerializer(serializers.Serializer):
    fx = serializers.FloatField()
    fy = serializers.FloatField()
    cx = serializers.FloatField()
    cy = serializers.FloatField()

    def validate(self, attrs):
        try:
            return Intrinsics(**attrs)
        except InvalidArgumentError as exc:
            raise serializers.ValidationError(str(exc)) from exc


class MotionSerializer(serializers.Serializer):
    rotation = Vector3Field()
    translation = Vector3Field()

    def validate(self, attrs):
        try:
            return MotionSE3(EulerAngles.from_sequence(attrs["rotation"]), tuple(attrs["translation"]))
        except InvalidArgumentError as exc:
            raise serializers.ValidationError(str(exc)) from exc


class ObjectEntrySerializer(serializers.Serializer):
    mask = serializers.CharField()
    flow = serializers.CharField()
    depth_offset = serializers.FloatField()
    motion = MotionSerializer()


class SceneFilesSerializer(serializers.Serializer):
    depth = serializers.CharField()
    next_depth = serializers.CharField()
    next_depth_valid = serializers.CharField()
    total_flow = serializers.CharField()
    ego_flow = serializers.CharField()


class SceneManifestSerializer(serializers.Serializer):
    """Converts between :class:`SceneSample` and its manifest dictionary.

    The scene directory comes in through ``context["directory"]``; ``save()``
    reads the referenced array files.
    """

    schema_version = serializers.IntegerField()
    seed = serializers.IntegerField(min_value=0)
    seed_trail = serializers.ListField(child=serializers.IntegerField(min_value=0), required=False)
    height = serializers.IntegerField(min_value=1)
    width = serializers.IntegerField(min_value=1)
    intrinsics = IntrinsicsSerializer()
    camera_motion = MotionSerializer()
    objects = ObjectEntrySerializer(many=True)
    files = SceneFilesSerializer()

    def validate_schema_version(self, value):
        if value != SCHEMA_VERSION:
            raise serializers.ValidationError(f"unrecognized schema_version {value!r}")
        return value

    def to_representation(self, scene: SceneSample):
        height, width = scene.depth.shape
        return {
            "schema_version": SCHEMA_VERSION,
            "seed": scene.seed,
            "seed_trail": list(scene.seed_trail),
            "height": height,
            "width": width,
            "intrinsics": IntrinsicsSerializer(scene.intrinsics).data,
            "camera_motion": MotionSerializer(scene.camera_motion).data,
            "objects": [
                {
                    "mask": f"object_{index:02d}_mask.png",
                    "flow": f"object_{index:02d}_flow.flo",
                    "depth_offset": item.spec.depth_offset,
                    "motion": MotionSerializer(item.spec.motion).data,
                }
                for index, item in enumerate(scene.objects)
            ],
            "files": dict(SCENE_FILES),
        }

    def _path(self, name):
        path = Path(self.context["directory"]) / name
        if not path.is_file():
            raise FileNotFoundError(f"manifest references missing file {path}")
        return path

    def create(self, validated_data) -> SceneSample:
        shape = (validated_data["height"], validated_data["width"])
        files = validated_data["files"]

        def flow(name):
            return formats.read_flow(self._path(name), shape).astype(np.float64)

        def depth(name):
            return formats.read_depth(self._path(name), shape).astype(np.float64)

        objects = []
        for entry in validated_data["objects"]:
            spec = ObjectSpec(
                mask=formats.read_mask(self._path(entry["mask"]), shape),
                depth_offset=entry["depth_offset"],
                motion=entry["motion"],
            )
            objects.append(ObjectFlow(spec, flow(entry["flow"])))
        return SceneSample(
            intrinsics=validated_data["intrinsics"],
            depth=depth(files["depth"]),
            next_depth=depth(files["next_depth"]),
            next_depth_valid=formats.read_mask(self._path(files["next_depth_valid"]), shape),
            total_flow=flow(files["total_flow"]),
            ego_flow=flow(files["ego_flow"]),
            objects=objects,
            camera_motion=validated_data["camera_motion"],
            seed=validated_data["seed"],
            seed_trail=list(validated_data.get("seed_trail", [])),
        )


def save_scene(scene: SceneSample, directory, force=False) -> Path:
    """Write ``scene`` into ``directory`` and return the manifest path."""
    directory = Path(directory)
    manifest_path = directory / MANIFEST_NAME
    if manifest_path.exists() and not force:
        raise OutputExistsError(f"{manifest_path} exists; pass --force to overwrite")
    directory.mkdir(parents=True, exist_ok=True)
    data = SceneManifestSerializer(scene).data
    text = render_json(data)
    files = data["files"]
    formats.write_depth(directory / files["depth"], scene.depth)
    formats.write_depth(directory / files["next_depth"], scene.next_depth)
    formats.write_mask(directory / files["next_depth_valid"], scene.next_depth_valid)
    formats.write_flow(directory / files["total_flow"], scene.total_flow)
    formats.write_flow(directory / files["ego_flow"], scene.ego_flow)
    for entry, item in zip(data["objects"], scene.objects):
        formats.write_mask(directory / entry["mask"], item.spec.mask)
        formats.write_flow(directory / entry["flow"], item.flow)
    manifest_path.write_text(text, encoding="utf-8")
    logger.info("wrote scene %s to %s", scene.seed, directory)
    return manifest_path


def load_scene(manifest_path) -> SceneSample:
    manifest_path = Path(manifest_path)
    if manifest_path.is_dir():
        manifest_path = manifest_path / MANIFEST_NAME
    serializer = SceneManifestSerializer(
        data=load_json(manifest_path), context={"directory": manifest_path.parent}
    )
    return validated(serializer, manifest_path).save()
