"""Selective edge compression: decide per item whether compressing before an
upload lowers end-to-end latency, and measure how well that decision does."""

from .codec import CodecError, DeflateCodec, IdentityCodec
from .estimator import EstimatorState, ThroughputEstimator, ThroughputSample
from .link import EpochSchedule, LinkSpec, make_schedule, transmission_time
from .policy import (
    Action,
    Decision,
    InvalidModelError,
    PolicyConfig,
    Reason,
    TransferItem,
    TypeModel,
    decide,
    predict_compressed_size,
    predict_compression_latency,
    threshold_gate,
)
from .training import ModelSet, TrainingSample, fit_type_model, measure_sample, train_corpus

__version__ = "0.1.0"
