"""Local HTTP service: surrogate prediction, oracle simulation, model list.

The registry is a directory of checkpoint files scanned on demand;
checkpoints are cached per (path, mtime) and shared across requests,
which is safe because loaded models are never mutated. All endpoints
are synchronous and idempotent given explicit seeds.
"""

from __future__ import annotations

import base64
import io
import math
import threading
import time as _time
from pathlib import Path

import numpy as np
from fastapi import FastAPI, HTTPException
from PIL import Image
from pydantic import BaseModel, Field

from .checkpoint import Checkpoint, condition_for_layout, load_checkpoint
from .dataset import oracle_heatmap_for
from .errors import (
    ConfigError,
    ContractError,
    LayoutSchemaError,
    OverCapacityError,
    UnreachableOccupantError,
)
from .layout import layout_from_json
from .metrics import nrmse, psnr, ssim
from .oracle import SimConfig, simulate


class ModelRegistry:
    def __init__(self, directory):
        self.directory = Path(directory)
        self._cache: dict[str, tuple[float, object]] = {}
        self._lock = threading.Lock()

    def _load(self, path: Path):
        key = str(path)
        mtime = path.stat().st_mtime
        with self._lock:
            hit = self._cache.get(key)
            if hit and hit[0] == mtime:
                return hit[1]
        try:
            loaded: object = load_checkpoint(path)
        except ConfigError as exc:
            loaded = exc
        with self._lock:
            self._cache[key] = (mtime, loaded)
        return loaded

    def list_models(self) -> list[dict]:
        out = []
        for path in sorted(self.directory.glob("*.pt")):
            loaded = self._load(path)
            if isinstance(loaded, Checkpoint):
                out.append(
                    {
                        "id": path.stem,
                        "kind": loaded.kind,
                        "run_id": loaded.run_id,
                        "image_size": loaded.image_size,
                        "representation": loaded.representation,
                        "val_ssim": loaded.metadata.get("best_val_ssim"),
                        "status": "ok",
                    }
                )
            else:
                out.append({"id": path.stem, "status": "error", "error": str(loaded)})
        return out

    def get(self, model_id: str) -> Checkpoint:
        path = self.directory / f"{model_id}.pt"
        if not path.exists():
            raise KeyError(model_id)
        loaded = self._load(path)
        if isinstance(loaded, Checkpoint):
            return loaded
        raise ConfigError(str(loaded))


class SimConfigBody(BaseModel):
    max_speed_mps: float = 1.19
    time_step_s: float = 0.4
    jam_density: float = 4.0
    max_sim_time_s: float = 1800.0
    seed: int = 0

    def to_config(self) -> SimConfig:
        return SimConfig(
            max_speed_mps=self.max_speed_mps,
            time_step_s=self.time_step_s,
            jam_density=self.jam_density,
            max_sim_time_s=self.max_sim_time_s,
            seed=self.seed,
        )


class PredictRequest(BaseModel):
    layout: dict
    model_id: str
    representation: str | None = None
    seed: int = 0
    compare_with_oracle: bool = False
    sim: SimConfigBody = Field(default_factory=SimConfigBody)


class SimulateRequest(BaseModel):
    layout: dict
    config: SimConfigBody = Field(default_factory=SimConfigBody)


def _png_b64(pixels: np.ndarray) -> str:
    buf = io.BytesIO()
    Image.fromarray(pixels, mode="L").save(buf, format="PNG")
    return base64.b64encode(buf.getvalue()).decode("ascii")


def _parse_layout(doc: dict):
    try:
        return layout_from_json(doc)
    except LayoutSchemaError as exc:
        raise HTTPException(status_code=400, detail=f"invalid layout: {exc}")


def _metric_value(value: float):
    return "inf" if isinstance(value, float) and math.isinf(value) else value


def create_app(registry_dir, ui_dir=None) -> FastAPI:
    app = FastAPI(title="evacflow service")
    registry = ModelRegistry(registry_dir)
    app.state.registry = registry

    @app.get("/api/models")
    def list_models():
        return {"models": registry.list_models()}

    @app.post("/api/predict")
    def predict(request: PredictRequest):
        layout = _parse_layout(request.layout)
        try:
            checkpoint = registry.get(request.model_id)
        except KeyError:
            raise HTTPException(
                status_code=404, detail=f"unknown model: {request.model_id}"
            )
        except ConfigError as exc:
            raise HTTPException(status_code=500, detail=str(exc))
        if (
            request.representation is not None
            and request.representation != checkpoint.representation
        ):
            raise HTTPException(
                status_code=400,
                detail=(
                    f"model {request.model_id} uses "
                    f"{checkpoint.representation!r} conditioning, "
                    f"not {request.representation!r}"
                ),
            )

        try:
            condition = condition_for_layout(layout, checkpoint)
        except ContractError as exc:
            raise HTTPException(status_code=400, detail=str(exc))
        t0 = _time.perf_counter()
        heatmap = checkpoint.predict(condition, seed=request.seed)
        elapsed_ms = max((_time.perf_counter() - t0) * 1000.0, 1e-3)
        response = {
            "model_id": request.model_id,
            "heatmap_png_base64": _png_b64(heatmap.pixels),
            "elapsed_ms": elapsed_ms,
            "image_size": checkpoint.image_size,
        }

        if request.compare_with_oracle:
            try:
                t0 = _time.perf_counter()
                oracle_pixels = oracle_heatmap_for(
                    layout, checkpoint.image_size, request.sim.to_config()
                )
                oracle_ms = max((_time.perf_counter() - t0) * 1000.0, 1e-3)
            except (UnreachableOccupantError, OverCapacityError, ConfigError) as exc:
                raise HTTPException(status_code=422, detail=str(exc))
            response["oracle_heatmap_png_base64"] = _png_b64(oracle_pixels)
            response["oracle_elapsed_ms"] = oracle_ms
            response["metrics"] = {
                "nrmse": nrmse(heatmap.pixels, oracle_pixels),
                "ssim": ssim(heatmap.pixels, oracle_pixels),
                "psnr": _metric_value(psnr(heatmap.pixels, oracle_pixels)),
            }
        return response

    @app.post("/api/simulate")
    def run_simulation(request: SimulateRequest):
        layout = _parse_layout(request.layout)
        try:
            t0 = _time.perf_counter()
            heatmap, stats, _ = simulate(layout, request.config.to_config())
            wall_ms = max((_time.perf_counter() - t0) * 1000.0, 1e-3)
        except (UnreachableOccupantError, OverCapacityError, ConfigError) as exc:
            raise HTTPException(status_code=422, detail=str(exc))
        return {
            "heatmap_png_base64": _png_b64(heatmap.pixels),
            "elapsed_ms": wall_ms,
            "stats": {
                "total_occupants": stats.total_occupants,
                "sim_time_s": stats.sim_time_s,
                "completed": stats.completed,
                "evac_times_s": list(stats.evac_times_s),
            },
            "grid_shape": list(heatmap.pixels.shape),
        }

    if ui_dir is not None and Path(ui_dir).exists():
        from fastapi.staticfiles import StaticFiles

        app.mount("/", StaticFiles(directory=str(ui_dir), html=True), name="ui")

    return app
