"""Built-in refiners and the HTTP client against a local stub service."""

import base64
import json
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

import numpy as np
import pytest

from atelier import errors
from atelier.imaging import ResampleFilter, decode_png, encode_png, resample
from atelier.refiner_api import (ClassicalRefiner, HttpRefiner, IdentityRefiner,
                                 RefineRequest, build_refiner)

from conftest import random_image


class _StubHandler(BaseHTTPRequestHandler):
    """Identity refiner over the wire; records request bodies."""

    info = {"name": "stub", "scale_factor": 1, "max_tile_px": 2048,
            "accepts_prompt": True, "deterministic_for_seed": True}
    received = []
    fail_next = []          # queue of status codes to fail with
    garbage_mode = False

    def log_message(self, *args):
        pass

    def do_GET(self):
        if self.path == "/v1/info":
            self._json(200, self.info)
        elif self.path == "/v1/health":
            self.send_response(200)
            self.end_headers()
            self.wfile.write(b"ok")
        else:
            self._json(404, {"error": "no such route"})

    def do_POST(self):
        if self.path != "/v1/refine":
            self._json(404, {"error": "no such route"})
            return
        body = json.loads(self.rfile.read(int(self.headers["Content-Length"])))
        type(self).received.append(body)
        if self.fail_next:
            self._json(self.fail_next.pop(0), {"error": "transient",
                                               "pass_id": body.get("pass_id")})
            return
        if self.garbage_mode:
            self.send_response(200)
            self.end_headers()
            self.wfile.write(b"this is not json")
            return
        self._json(200, {"image": body["image"]})

    def _json(self, code, payload):
        data = json.dumps(payload).encode()
        self.send_response(code)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(data)))
        self.end_headers()
        self.wfile.write(data)


@pytest.fixture
def stub_server():
    _StubHandler.received = []
    _StubHandler.fail_next = []
    _StubHandler.garbage_mode = False
    server = ThreadingHTTPServer(("127.0.0.1", 0), _StubHandler)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    yield f"http://127.0.0.1:{server.server_address[1]}"
    server.shutdown()


class TestBuiltins:
    def test_identity(self, rng):
        tile = random_image(rng, 64, 64)
        ref = IdentityRefiner()
        caps = ref.capabilities()
        assert caps.scale_factor == 1 and caps.deterministic_for_seed
        out = ref.refine(RefineRequest(image=tile, seed=1))
        assert np.array_equal(out.pixels, tile.pixels)

    def test_classical_4x_matches_resample_oracle(self, rng):
        tile = random_image(rng, 64, 64)
        out = ClassicalRefiner(4).refine(RefineRequest(image=tile))
        oracle = resample(tile, 256, 256, ResampleFilter.LANCZOS3)
        assert np.array_equal(out.pixels, oracle.pixels)

    def test_scale_invariant_all_builtins(self, rng):
        for ref in (IdentityRefiner(), ClassicalRefiner(2), ClassicalRefiner(4)):
            sf = ref.capabilities().scale_factor
            tile = random_image(rng, 48, 32)
            out = ref.refine(RefineRequest(image=tile))
            assert (out.width, out.height) == (48 * sf, 32 * sf)

    def test_capability_exceeded(self, rng):
        big = random_image(rng, 2048, 2048)
        ref = ClassicalRefiner(4, max_tile_px=1536)
        with pytest.raises(errors.CapabilityExceeded):
            ref.refine(RefineRequest(image=big))

    def test_invalid_scale(self):
        with pytest.raises(errors.CapabilityExceeded):
            ClassicalRefiner(3)


class TestHttpClient:
    def test_probe_and_roundtrip(self, stub_server, rng):
        ref = HttpRefiner(stub_server)
        caps = ref.capabilities()
        assert caps.name == "stub" and caps.scale_factor == 1
        tile = random_image(rng, 32, 24)
        out = ref.refine(RefineRequest(image=tile, denoise=0.31, prompt="",
                                       adapter_scale=1.0, seed=99, pass_id="A"))
        assert np.array_equal(out.pixels, tile.pixels)

    def test_wire_format_field_names(self, stub_server, rng):
        ref = HttpRefiner(stub_server)
        tile = random_image(rng, 16, 16)
        ref.refine(RefineRequest(image=tile, denoise=0.2, prompt="ink hatch",
                                 adapter_scale=0.8, seed=7, pass_id="B"))
        body = _StubHandler.received[-1]
        assert set(body) == {"image", "denoise", "prompt", "adapter_scale",
                             "seed", "pass_id"}
        assert body["denoise"] == 0.2 and body["seed"] == 7
        assert body["pass_id"] == "B" and body["prompt"] == "ink hatch"
        decoded = decode_png(base64.b64decode(body["image"]))
        assert np.array_equal(decoded.pixels, tile.pixels)

    def test_retry_on_5xx_then_success(self, stub_server, rng):
        ref = HttpRefiner(stub_server, retries=2)
        _StubHandler.fail_next = [500]
        tile = random_image(rng, 8, 8)
        out = ref.refine(RefineRequest(image=tile, seed=5))
        assert np.array_equal(out.pixels, tile.pixels)
        assert len(_StubHandler.received) == 2
        # idempotent retry: identical seed on both attempts
        assert _StubHandler.received[0]["seed"] == _StubHandler.received[1]["seed"]

    def test_4xx_is_protocol_error_no_retry(self, stub_server, rng):
        ref = HttpRefiner(stub_server, retries=2)
        _StubHandler.fail_next = [400]
        with pytest.raises(errors.ProtocolError):
            ref.refine(RefineRequest(image=random_image(rng, 8, 8)))
        assert len(_StubHandler.received) == 1

    def test_persistent_5xx_is_transport_error(self, stub_server, rng):
        ref = HttpRefiner(stub_server, retries=1)
        _StubHandler.fail_next = [500, 500]
        with pytest.raises(errors.TransportError):
            ref.refine(RefineRequest(image=random_image(rng, 8, 8)))

    def test_garbage_response_is_protocol_error(self, stub_server, rng):
        ref = HttpRefiner(stub_server)
        _StubHandler.garbage_mode = True
        with pytest.raises(errors.ProtocolError):
            ref.refine(RefineRequest(image=random_image(rng, 8, 8)))

    def test_unreachable_endpoint_at_construction(self):
        with pytest.raises(errors.TransportError):
            HttpRefiner("http://127.0.0.1:9", timeout=0.5, retries=0)


class TestFactory:
    def test_kinds(self, stub_server):
        assert build_refiner("identity").capabilities().scale_factor == 1
        assert build_refiner("classical", scale_factor=4).capabilities().scale_factor == 4
        assert build_refiner("http", stub_server).capabilities().name == "stub"
        with pytest.raises(errors.CapabilityExceeded):
            build_refiner("quantum")
        with pytest.raises(errors.TransportError):
            build_refiner("http", None)
