"""
On-disk representation of estimates and evaluation reports.

A prediction ``NAME.json`` sits next to ``NAME_maps.npz`` (pixel-wise maps) and
``NAME_ego.flo`` (ego flow reconstructed from the fused pose).
"""

import json
import logging
from pathlib import Path

import numpy as np
from rest_framework import serializers

from synthesis import formats
from synthesis.exceptions import FormatError, OutputExistsError
from synthesis.serializers import Vector3Field, load_json, render_json, validated

from .models import GlobalPose, PixelwisePose, ScenePrediction

logger = logging.getLogger(__name__)

SCHEMA_VERSION = 1
PREDICTION_KIND = "prediction"
REPORT_KIND = "evaluation_report"
MAP_KEYS = ("rotation", "translation", "rotation_log_var", "translation_log_var")


class PredictionFilesSerializer(serializers.Serializer):
    maps = serializers.CharField(allow_null=True)
    ego_flow = serializers.CharField(allow_null=True)


class RefinementSerializer(serializers.Serializer):
    iterations = serializers.IntegerField(min_value=0)
    cost = serializers.FloatField(min_value=0)
    converged = serializers.BooleanField()


class PredictionSerializer(serializers.Serializer):
    """Prediction JSON; the file path comes in through ``context["path"]``."""

    kind = serializers.ChoiceField(choices=[PREDICTION_KIND])
    schema_version = serializers.IntegerField()
    scene = serializers.CharField()
    seed = serializers.IntegerField(allow_null=True, required=False)
    rotation = Vector3Field()
    translation = Vector3Field()
    refinement = RefinementSerializer(allow_null=True, required=False)
    files = PredictionFilesSerializer()

    def validate_schema_version(self, value):
        if value != SCHEMA_VERSION:
            raise serializers.ValidationError(f"unrecognized schema_version {value!r}")
        return value

    @property
    def path(self):
        return Path(self.context["path"])

    @property
    def maps_name(self):
        return f"{self.path.stem}_maps.npz"

    @property
    def flow_name(self):
        return f"{self.path.stem}_ego.flo"

    def to_representation(self, prediction: ScenePrediction):
        refinement = prediction.refinement
        if refinement is not None:
            refinement = RefinementSerializer(refinement).data
        data = {
            "kind": PREDICTION_KIND,
            "schema_version": SCHEMA_VERSION,
            "scene": prediction.name,
            "seed": prediction.seed,
            "rotation": list(prediction.pose.rotation),
            "translation": list(prediction.pose.translation),
            "refinement": refinement,
            "files": {
                "maps": self.maps_name if prediction.pixelwise is not None else None,
                "ego_flow": self.flow_name if prediction.ego_flow is not None else None,
            },
        }
        data.update(self.context.get("extra") or {})
        return data

    def create(self, validated_data) -> ScenePrediction:
        files = validated_data["files"]
        pixelwise = None
        if files["maps"]:
            with np.load(self.path.parent / files["maps"]) as archive:
                try:
                    pixelwise = PixelwisePose(**{key: archive[key] for key in MAP_KEYS})
                except KeyError as exc:
                    raise FormatError(f"maps archive lacks {exc}", path=self.path) from exc
        ego_flow = None
        if files["ego_flow"]:
            ego_flow = formats.read_flow(self.path.parent / files["ego_flow"]).astype(np.float64)
        refinement = validated_data.get("refinement")
        return ScenePrediction(
            name=validated_data["scene"],
            pose=GlobalPose(validated_data["rotation"], validated_data["translation"]),
            ego_flow=ego_flow,
            pixelwise=pixelwise,
            seed=validated_data.get("seed"),
            refinement=dict(refinement) if refinement is not None else None,
        )


def save_prediction(prediction: ScenePrediction, path, force=False, extra=None) -> Path:
    path = Path(path)
    if path.exists() and not force:
        raise OutputExistsError(f"{path} exists; pass --force to overwrite")
    serializer = PredictionSerializer(prediction, context={"path": path, "extra": extra})
    text = render_json(serializer.data)
    path.parent.mkdir(parents=True, exist_ok=True)
    if prediction.pixelwise is not None:
        np.savez(path.parent / serializer.maps_name, **prediction.pixelwise.as_arrays())
    if prediction.ego_flow is not None:
        formats.write_flow(path.parent / serializer.flow_name, prediction.ego_flow)
    path.write_text(text, encoding="utf-8")
    logger.info("wrote prediction for %s to %s", prediction.name, path)
    return path


def load_prediction(path) -> ScenePrediction:
    path = Path(path)
    serializer = PredictionSerializer(data=load_json(path), context={"path": path})
    return validated(serializer, path).save()


def is_prediction_file(path) -> bool:
    """Whether ``path`` holds JSON tagged as a prediction; anything else is skipped."""
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, UnicodeDecodeError, json.JSONDecodeError):
        return False
    return isinstance(data, dict) and data.get("kind") == PREDICTION_KIND


def report_to_dict(report):
    return {
        "kind": REPORT_KIND,
        "schema_version": SCHEMA_VERSION,
        "units": dict(report.units),
        "l1_reduce": report.l1_reduce,
        "epe_norm": report.epe_norm,
        "aggregate": {"r_err": report.r_err, "t_err": report.t_err, "epe": report.epe},
        "scenes": [
            {"scene": row.name, "r_err": row.r_err, "t_err": row.t_err, "epe": row.epe}
            for row in report.scenes
        ],
    }


def save_report(report, path, force=False) -> Path:
    path = Path(path)
    if path.exists() and not force:
        raise OutputExistsError(f"{path} exists; pass --force to overwrite")
    text = render_json(report_to_dict(report))
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8")
    return path
