"""Cloud-side endpoint: accepts uploads, decompresses when a codec is declared,
and acknowledges with byte counts and decompression time.

Also exposes the decision engine over HTTP when a model set is loaded.
"""

from __future__ import annotations

import hashlib
import logging
import time
from typing import Callable, Optional

from fastapi import FastAPI, HTTPException, Request
from fastapi.responses import JSONResponse

from .codec import CodecError, wire_codec
from .policy import PolicyConfig, decide_size, mbps_to_bps, normalize_label
from .schemas import (
    CODEC_HEADER,
    ITEM_HEADER,
    LABEL_HEADER,
    DecideRequest,
    DecisionResponse,
    ModelSetOut,
    TransferAck,
)
from .training import ModelSet

logger = logging.getLogger(__name__)


def create_app(
    models: Optional[ModelSet] = None,
    config: Optional[PolicyConfig] = None,
    sink: Optional[Callable[[str, bytes], None]] = None,
) -> FastAPI:
    """Build the service. ``sink(item_id, payload)`` sees every decompressed upload."""
    app = FastAPI(title="selzip endpoint")
    app.state.models = models
    app.state.config = config or PolicyConfig()
    app.state.sink = sink

    @app.get("/health")
    def health():
        return {"status": "ok", "models_loaded": app.state.models is not None}

    @app.post("/transfer", response_model=TransferAck, responses={400: {}, 422: {}})
    async def transfer(request: Request):
        item_id = request.headers.get(ITEM_HEADER)
        if not item_id:
            return _error(400, "missing_header", f"{ITEM_HEADER} is required")
        try:
            label = normalize_label(request.headers.get(LABEL_HEADER, "unknown"))
        except ValueError as exc:
            return _error(400, "bad_label", str(exc))
        codec_name = request.headers.get(CODEC_HEADER, "identity")
        try:
            codec = wire_codec(codec_name)
        except CodecError as exc:
            return _error(400, "unknown_codec", str(exc))

        body = await request.body()
        decompression_time = 0.0
        if codec.codec_id == "identity":
            payload = body
        else:
            t0 = time.perf_counter()
            try:
                payload = codec.decompress(body)
            except CodecError as exc:
                logger.warning("item %s: %s", item_id, exc)
                return _error(422, "decompression_failed", str(exc))
            decompression_time = time.perf_counter() - t0

        if app.state.sink is not None:
            app.state.sink(item_id, payload)
        return TransferAck(
            item_id=item_id,
            label=label,
            codec=codec_name.strip().lower(),
            received_bytes=len(body),
            decompressed_bytes=len(payload),
            decompression_time=decompression_time,
            sha256=hashlib.sha256(payload).hexdigest(),
        )

    @app.get("/models", response_model=ModelSetOut)
    def get_models():
        if app.state.models is None:
            raise HTTPException(503, "no model set loaded")
        return app.state.models.to_dict()

    @app.post("/decide", response_model=DecisionResponse)
    def post_decide(req: DecideRequest):
        models: Optional[ModelSet] = app.state.models
        if models is None:
            raise HTTPException(503, "no model set loaded; train one first")
        rate = req.throughput_bps if req.throughput_bps is not None else mbps_to_bps(req.throughput_mbps)
        model = models.model_for(req.label)
        d = decide_size(req.size, req.label, model, rate, app.state.config)
        return DecisionResponse(
            action=d.action.value,
            reason=d.reason.value,
            predicted_compressed_size=d.predicted_compressed_size,
            predicted_compression_latency=d.predicted_compression_latency,
            model_label=model.label,
            throughput_bps=rate,
        )

    return app


def _error(status: int, error: str, detail: str) -> JSONResponse:
    return JSONResponse(status_code=status, content={"error": error, "detail": detail})


def serve(host: str = "127.0.0.1", port: int = 8080, models: Optional[ModelSet] = None,
          config: Optional[PolicyConfig] = None) -> None:
    import uvicorn

    uvicorn.run(create_app(models, config), host=host, port=port, log_level="warning")
