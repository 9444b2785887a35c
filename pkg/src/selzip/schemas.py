from typing import Optional

from pydantic import BaseModel, Field, model_validator

CODEC_HEADER = "X-Selzip-Codec"
LABEL_HEADER = "X-Selzip-Label"
ITEM_HEADER = "X-Selzip-Item"


class TransferAck(BaseModel):
    item_id: str
    label: str
    codec: str
    received_bytes: int
    decompressed_bytes: int
    decompression_time: float
    sha256: str


class ErrorBody(BaseModel):
    error: str
    detail: str


class DecideRequest(BaseModel):
    size: int = Field(ge=0)
    label: str = Field(min_length=1)
    throughput_bps: Optional[float] = Field(default=None, gt=0)
    throughput_mbps: Optional[float] = Field(default=None, gt=0)

    @model_validator(mode="after")
    def _one_rate(self):
        if (self.throughput_bps is None) == (self.throughput_mbps is None):
            raise ValueError("give exactly one of throughput_bps or throughput_mbps")
        return self


class DecisionResponse(BaseModel):
    action: str
    reason: str
    predicted_compressed_size: Optional[int] = None
    predicted_compression_latency: Optional[float] = None
    model_label: str
    throughput_bps: float


class TypeModelOut(BaseModel):
    label: str
    alpha: float
    beta: float
    compressibility: float


class ModelSetOut(BaseModel):
    codec_id: str
    trained_at: str
    models: list[TypeModelOut]
    global_fallback: TypeModelOut
