import hashlib
import zlib

import numpy as np
import pytest
from fastapi.testclient import TestClient

from selzip.codec import CodecError, DeflateCodec
from selzip.estimator import ThroughputEstimator
from selzip.link import LinkSpec
from selzip.policy import Action, Decision, Reason, TransferItem, TypeModel
from selzip.server import create_app
from selzip.training import ModelSet
from selzip.transfer import AnalyticEndpoint, HttpEndpoint, TransferClient, TransferError, TransferOutcome

COMPRESS = Decision(Action.COMPRESS, Reason.TRADEOFF_FAVORS_COMPRESS)
RAW = Decision(Action.SEND_RAW, Reason.TRADEOFF_FAVORS_RAW)


@pytest.fixture
def api():
    ms = ModelSet({"text": TypeModel("text", 1e-8, 1e-4, 4.0)}, TypeModel("*", 1e-8, 1e-4, 2.0), "deflate-zlib-6")
    return TestClient(create_app(ms))


class TestServer:
    def test_deflate_upload(self, api):
        data = b"hello " * 1000
        body = zlib.compress(data)
        r = api.post("/transfer", content=body, headers={"X-Selzip-Codec": "deflate", "X-Selzip-Label": "Text", "X-Selzip-Item": "a1"})
        assert r.status_code == 200
        ack = r.json()
        assert ack["received_bytes"] == len(body)
        assert ack["decompressed_bytes"] == len(data)
        assert ack["decompression_time"] > 0
        assert ack["label"] == "text" and ack["item_id"] == "a1"
        assert ack["sha256"] == hashlib.sha256(data).hexdigest()

    def test_identity_upload(self, api):
        r = api.post("/transfer", content=b"xyz", headers={"X-Selzip-Item": "b"})
        assert r.status_code == 200
        assert r.json()["decompression_time"] == 0.0 and r.json()["codec"] == "identity"

    def test_missing_item_header(self, api):
        r = api.post("/transfer", content=b"x", headers={"X-Selzip-Codec": "identity"})
        assert r.status_code == 400 and r.json()["error"] == "missing_header"

    def test_unknown_codec(self, api):
        r = api.post("/transfer", content=b"x", headers={"X-Selzip-Codec": "brotli", "X-Selzip-Item": "c"})
        assert r.status_code == 400 and r.json()["error"] == "unknown_codec"

    def test_corrupt_stream_is_explicit_error(self, api):
        body = zlib.compress(b"a" * 5000)[:-6]
        r = api.post("/transfer", content=body, headers={"X-Selzip-Codec": "deflate", "X-Selzip-Item": "d"})
        assert r.status_code == 422 and r.json()["error"] == "decompression_failed"

    def test_decide_endpoint(self, api):
        r = api.post("/decide", json={"size": 1_000_000, "label": "TEXT", "throughput_mbps": 2})
        assert r.status_code == 200
        d = r.json()
        assert d["action"] == "Compress" and d["model_label"] == "text"
        assert d["predicted_compressed_size"] == 250_000
        assert d["throughput_bps"] == 250_000
        r = api.post("/decide", json={"size": 100, "label": "text", "throughput_bps": 1e5})
        assert r.json()["reason"] == "BelowSizeThreshold"
        r = api.post("/decide", json={"size": 50_000, "label": "never-seen", "throughput_bps": 1e5})
        assert r.json()["model_label"] == "*"

    def test_decide_validation(self, api):
        assert api.post("/decide", json={"size": -1, "label": "t", "throughput_bps": 1}).status_code == 422
        assert api.post("/decide", json={"size": 1, "label": "t"}).status_code == 422
        assert api.post("/decide", json={"size": 1, "label": "t", "throughput_bps": 1, "throughput_mbps": 1}).status_code == 422

    def test_no_models(self):
        c = TestClient(create_app())
        assert c.get("/health").json() == {"status": "ok", "models_loaded": False}
        assert c.post("/decide", json={"size": 1, "label": "t", "throughput_bps": 1}).status_code == 503
        assert c.get("/models").status_code == 503

    def test_models_endpoint(self, api):
        doc = api.get("/models").json()
        assert doc["codec_id"] == "deflate-zlib-6" and doc["models"][0]["label"] == "text"


class TestAnalyticSend:
    def test_raw_time_is_size_over_rate(self):
        link = LinkSpec.from_mbps(2)
        est = ThroughputEstimator()
        client = TransferClient(AnalyticEndpoint(link), estimator=est)
        item = TransferItem(bytes(500_000), "bin", "r1")
        o = client.send(item, RAW)
        assert o.bytes_on_wire == 500_000
        assert o.transmission_time == pytest.approx(500_000 / 250_000, rel=0.05)
        assert o.compression_time == 0 and o.decompression_time == 0
        assert o.total == pytest.approx(o.overhead + o.compression_time + o.transmission_time)
        assert est.estimate() == pytest.approx(250_000, rel=0.05)

    def test_zero_payload_compress(self):
        client = TransferClient(AnalyticEndpoint(LinkSpec.from_mbps(10)), verify=True)
        o = client.send(TransferItem(bytes(1 << 20), "text", "z"), COMPRESS)
        assert o.action_taken is Action.COMPRESS
        assert o.bytes_on_wire < 0.02 * (1 << 20)
        assert o.compression_time > 0 and o.decompression_time > 0

    def test_codec_failure_falls_back(self):
        class Broken(DeflateCodec):
            def compress(self, data):
                raise CodecError("nope")

        client = TransferClient(AnalyticEndpoint(LinkSpec.from_mbps(10)), Broken())
        o = client.send(TransferItem(b"a" * 10_000, "text", "f"), COMPRESS)
        assert o.codec_fallback and o.action_taken is Action.SEND_RAW
        assert o.bytes_on_wire == 10_000 and o.compression_time == 0

    def test_outcome_roundtrip(self):
        o = TransferOutcome("i", Action.COMPRESS, 10, 40, 0.1, 0.2, 0.3, 0.05, label="t")
        assert o.total == pytest.approx(0.6) and o.end_to_end == pytest.approx(0.65)
        assert TransferOutcome.from_dict(o.to_dict()) == o


class TestLiveSend:
    def test_round_trip_and_accounting(self, live_server, received):
        ep = HttpEndpoint.from_url(live_server.url)
        client = TransferClient(ep, verify=True)
        rng = np.random.default_rng(0)
        for i in range(50):
            n = int(rng.integers(0, 50_000))
            payload = rng.bytes(n) if i % 2 else b"abc," * (n // 4)
            item = TransferItem(payload, "text", f"live-{i}")
            o = client.send(item, COMPRESS if i % 3 else RAW)
            assert received[f"live-{i}"] == payload
            if o.action_taken is Action.SEND_RAW:
                assert o.compression_time == 0 and o.decompression_time == 0
        ep.close()

    def test_shaped_raw_send(self, live_server):
        link = LinkSpec.from_mbps(20)
        ep = HttpEndpoint.from_url(live_server.url, link)
        o = TransferClient(ep).send(TransferItem(bytes(1_000_000), "bin", "shaped"), RAW)
        ep.close()
        assert o.transmission_time == pytest.approx(1_000_000 / link.bandwidth, rel=0.10)

    def test_server_error_raises(self, live_server):
        ep = HttpEndpoint.from_url(live_server.url)
        with pytest.raises(TransferError) as info:
            ep.post(b"garbage", {"X-Selzip-Codec": "deflate", "X-Selzip-Item": "bad"})
        assert info.value.partial["status"] == 422
        ep.close()

    def test_unreachable_is_retryable_error(self):
        ep = HttpEndpoint("127.0.0.1", 1)
        with pytest.raises(TransferError) as info:
            TransferClient(ep).send(TransferItem(b"x" * 10, "t", "u"), RAW, decision_time=0.001)
        assert "elapsed" in info.value.partial and info.value.partial["overhead"] == 0.001
