"""Shared fixtures: a configurable in-process stub server for the wire tests.

The stub speaks the three JSON endpoints over a real socket so client-side
behavior (retries, timeouts, typed failures, payload bytes) is exercised
end to end without any model dependencies.
"""

from __future__ import annotations

import base64
import io
import json
import threading
import time
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

import numpy as np
import pytest
from PIL import Image


def _png_b64_of(arr: np.ndarray) -> str:
    buf = io.BytesIO()
    Image.fromarray(arr.astype(np.uint8), mode="RGB").save(buf, format="PNG")
    return base64.b64encode(buf.getvalue()).decode("ascii")


class StubState:
    """Mutable behavior knobs plus a request log, shared with the handler."""

    def __init__(self):
        self.sr_mode = "echo"  # echo | wrong_dim | bad_request_id | http_500 | sleep
        self.prompt_mode = "text"  # text | empty | http_500 | sleep
        self.prompt_text = "fur"
        self.critic_text = "87"
        self.metric_mode = "value"  # value | http_404 | not_json | non_finite
        self.metric_values = {}
        self.default_metric = 3.0
        self.sleep_s = 1.2
        self.log = []  # (path, payload dict)

    def requests_to(self, path: str) -> list[dict]:
        return [p for (pth, p) in self.log if pth == path]


class _Handler(BaseHTTPRequestHandler):
    def log_message(self, fmt, *args):  # silence
        pass

    def _reply_json(self, obj, status=200):
        body = json.dumps(obj).encode("utf-8")
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)

    def do_POST(self):
        state: StubState = self.server.state
        length = int(self.headers.get("Content-Length", "0"))
        payload = json.loads(self.rfile.read(length)) if length else {}
        state.log.append((self.path, payload))
        if self.path == "/v1/sr":
            self._handle_sr(state, payload)
        elif self.path == "/v1/prompt":
            self._handle_prompt(state, payload)
        elif self.path == "/v1/metric":
            self._handle_metric(state, payload)
        else:
            self._reply_json({"error": "unknown path"}, status=404)

    def _handle_sr(self, state, payload):
        if state.sr_mode == "sleep":
            time.sleep(state.sleep_s)
        if state.sr_mode == "http_500":
            self._reply_json({"error": "boom"}, status=500)
            return
        rid = payload.get("request_id", "")
        if state.sr_mode == "wrong_dim":
            img = np.zeros((480, 480, 3), dtype=np.uint8)
            self._reply_json({"request_id": rid, "image_png_b64": _png_b64_of(img), "meta": {}})
            return
        if state.sr_mode == "bad_request_id":
            rid = rid + "-mangled"
        # echo: return exactly the PNG bytes we were sent
        self._reply_json(
            {
                "request_id": rid,
                "image_png_b64": payload.get("image_png_b64", ""),
                "meta": {"stub": "echo"},
            }
        )

    def _handle_prompt(self, state, payload):
        if state.prompt_mode == "sleep":
            time.sleep(state.sleep_s)
        if state.prompt_mode == "http_500":
            self._reply_json({"error": "boom"}, status=500)
            return
        rid = payload.get("request_id", "")
        if payload.get("template_id") == "critic":
            text = state.critic_text
        elif state.prompt_mode == "empty":
            text = ""
        else:
            text = state.prompt_text
        self._reply_json({"request_id": rid, "text": text})

    def _handle_metric(self, state, payload):
        if state.metric_mode == "http_404":
            self._reply_json({"error": "no such metric"}, status=404)
            return
        if state.metric_mode == "not_json":
            body = b"<html>oops</html>"
            self.send_response(200)
            self.send_header("Content-Length", str(len(body)))
            self.end_headers()
            self.wfile.write(body)
            return
        metric = payload.get("metric", "")
        if state.metric_mode == "non_finite":
            self._reply_json({"score": None})
            return
        score = state.metric_values.get(metric, state.default_metric)
        self._reply_json({"score": score})


class StubServer:
    def __init__(self):
        self.state = StubState()
        self._httpd = ThreadingHTTPServer(("127.0.0.1", 0), _Handler)
        self._httpd.state = self.state
        self._httpd.daemon_threads = True
        self._thread = threading.Thread(target=self._httpd.serve_forever, daemon=True)
        self._thread.start()
        host, port = self._httpd.server_address
        self.url = f"http://{host}:{port}"

    def close(self):
        self._httpd.shutdown()
        self._httpd.server_close()


@pytest.fixture
def stub_server():
    server = StubServer()
    yield server
    server.close()


@pytest.fixture
def closed_port_url():
    """A URL nothing listens on, for connection-refused paths."""
    import socket

    s = socket.socket()
    s.bind(("127.0.0.1", 0))
    port = s.getsockname()[1]
    s.close()
    return f"http://127.0.0.1:{port}"
