"""HTTP prediction + explanation service over a persisted model bundle.

The service loads a bundle (model.json + preprocess.json written by a stage
run) into an immutable snapshot. Requests are raw feature maps in canonical
column names and original units; the snapshot applies the persisted
preprocessing, so clients never deal with encoded/standardized space.
Hot reload replaces the snapshot atomically via an explicit admin endpoint;
in-flight requests keep the snapshot they started with.
"""
from __future__ import annotations

import json
import math
import threading
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Optional

from fastapi import FastAPI, HTTPException
from pydantic import BaseModel, Field

from . import gbdt, shap
from .domain import CATEGORICAL_FEATURES, CONNECTION_TIME_FEATURES, IS_GROUP, DsmStage
from .preprocess import Preprocessor

LOCAL_ACCURACY_TOL = 1e-6


class PredictRequest(BaseModel):
    stage: str
    features: dict[str, Any]


class WhatIfRequest(BaseModel):
    base: PredictRequest
    perturbations: list[dict[str, Any]] = Field(default_factory=list)


class FieldError(HTTPException):
    def __init__(self, detail: str):
        super().__init__(status_code=400, detail=detail)


@dataclass(frozen=True)
class ModelSnapshot:
    """Immutable serving state: one model, one preprocessor, one threshold."""

    stage: DsmStage
    features: tuple[str, ...]
    preprocessor: Preprocessor
    ensemble: gbdt.TreeEnsemble
    threshold: float
    threshold_objective: str
    test_precision: float
    version: str

    @classmethod
    def load(cls, bundle_dir) -> "ModelSnapshot":
        bundle_dir = Path(bundle_dir)
        manifest = json.loads((bundle_dir / "preprocess.json").read_text(encoding="utf-8"))
        ensemble = gbdt.deserialize(bundle_dir / "model.json")
        serving = manifest["serving"]
        return cls(
            stage=DsmStage(manifest["stage"]),
            features=tuple(manifest["features"]),
            preprocessor=Preprocessor.from_manifest(manifest["preprocessor"]),
            ensemble=ensemble,
            threshold=float(serving["threshold"]),
            threshold_objective=serving["threshold_objective"],
            test_precision=float(serving["test_precision"]),
            version=serving["version"],
        )

    def feature_schema(self) -> list[dict]:
        out = []
        for f in self.features:
            if f in CATEGORICAL_FEATURES:
                kind = "categorical"
                tokens = sorted(self.preprocessor.encoder.mapping.get(f, {}).keys())
            else:
                kind = "numeric"
                tokens = None
            entry = {"name": f, "kind": kind}
            if tokens:
                entry["known_categories"] = tokens[:64]
            if f in (IS_GROUP,):
                entry["kind"] = "boolean"
            if f in CONNECTION_TIME_FEATURES:
                entry["unit"] = "minutes"
            out.append(entry)
        return out

    def _coerce(self, feature: str, value) -> Any:
        if feature in CATEGORICAL_FEATURES:
            if not isinstance(value, str):
                raise FieldError(f"feature {feature!r} expects a category string")
            return value
        if isinstance(value, bool):
            return float(value)
        if isinstance(value, (int, float)) and math.isfinite(float(value)):
            return float(value)
        raise FieldError(f"feature {feature!r} expects a finite number")

    def predict(self, features: dict[str, Any]) -> dict:
        raw: dict[str, Any] = {}
        for f in self.features:
            if f not in features or features[f] is None:
                raise FieldError(f"missing required feature {f!r} for stage {self.stage.value}")
            raw[f] = self._coerce(f, features[f])
        row = self.preprocessor.transform_row(raw)
        explanation = shap.tree_shap(self.ensemble, row)
        if explanation.local_accuracy_gap > LOCAL_ACCURACY_TOL:
            raise HTTPException(status_code=500, detail="explanation failed local accuracy")
        probability = float(gbdt.sigmoid(explanation.margin))
        return {
            "stage": self.stage.value,
            "model_version": self.version,
            "probability": probability,
            "threshold": self.threshold,
            "predicted_missed": probability >= self.threshold,
            "margin": explanation.margin,
            "base_value": explanation.base_value,
            "shap_values": {name: float(v) for name, v in
                            zip(explanation.feature_names, explanation.values)},
        }


class _SnapshotHolder:
    def __init__(self, snapshot: Optional[ModelSnapshot] = None):
        self._lock = threading.Lock()
        self._snapshot = snapshot

    def get(self) -> Optional[ModelSnapshot]:
        with self._lock:
            return self._snapshot

    def swap(self, snapshot: ModelSnapshot) -> None:
        with self._lock:
            self._snapshot = snapshot


def create_app(bundle_dir=None, ui_dir=None) -> FastAPI:
    app = FastAPI(title="connrisk", version="1.0")
    holder = _SnapshotHolder(ModelSnapshot.load(bundle_dir) if bundle_dir else None)
    app.state.snapshots = holder

    def current() -> ModelSnapshot:
        snapshot = holder.get()
        if snapshot is None:
            raise HTTPException(status_code=503, detail="model not loaded")
        return snapshot

    def check_stage(snapshot: ModelSnapshot, requested: str):
        try:
            stage = DsmStage(requested)
        except ValueError:
            raise FieldError(f"unknown stage {requested!r}") from None
        if stage is not snapshot.stage:
            raise HTTPException(
                status_code=409,
                detail=f"stage mismatch: model serves {snapshot.stage.value!r}, "
                       f"request is for {stage.value!r}")

    @app.get("/healthz")
    def healthz():
        return {"status": "ok", "model_loaded": holder.get() is not None}

    @app.get("/v1/model")
    def model_info():
        snapshot = current()
        r_min = math.inf if snapshot.test_precision == 0 else 1.0 / snapshot.test_precision
        return {
            "stage": snapshot.stage.value,
            "version": snapshot.version,
            "features": snapshot.feature_schema(),
            "threshold": snapshot.threshold,
            "threshold_objective": snapshot.threshold_objective,
            "test_precision": snapshot.test_precision,
            "r_min": None if math.isinf(r_min) else r_min,
            "n_trees": len(snapshot.ensemble.trees),
            "base_score": snapshot.ensemble.base_score,
        }

    @app.post("/v1/predict")
    def predict(request: PredictRequest):
        snapshot = current()
        check_stage(snapshot, request.stage)
        return snapshot.predict(request.features)

    @app.post("/v1/whatif")
    def whatif(request: WhatIfRequest):
        snapshot = current()  # one snapshot for the whole batch
        check_stage(snapshot, request.base.stage)
        responses = []
        for perturbation in request.perturbations:
            merged = dict(request.base.features)
            merged.update(perturbation)
            responses.append(snapshot.predict(merged))
        return {"responses": responses}

    @app.post("/admin/reload")
    def reload_model(payload: dict):
        directory = payload.get("bundle_dir")
        if not directory:
            raise FieldError("bundle_dir is required")
        try:
            snapshot = ModelSnapshot.load(directory)
        except FileNotFoundError as exc:
            raise HTTPException(status_code=400, detail=f"cannot load bundle: {exc}") from exc
        holder.swap(snapshot)
        return {"status": "ok", "stage": snapshot.stage.value, "version": snapshot.version}

    if ui_dir is not None:
        from fastapi.staticfiles import StaticFiles
        app.mount("/", StaticFiles(directory=str(ui_dir), html=True), name="ui")

    return app
