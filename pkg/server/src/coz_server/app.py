"""The HTTP server: role routing, schema enforcement, and concurrency limits.

Responses follow the wire schemas exactly: /v1/sr and /v1/prompt echo the
request_id verbatim, /v1/metric returns a bare score object. Disabled roles
answer 503, schema violations 400, engine faults 500; all errors are JSON
objects with an "error" field. The server holds no per-request state, so
identical requests to stub engines produce byte-identical responses.
"""

from __future__ import annotations

import json
import threading
from collections import defaultdict
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

from .config import ServerConfig
from .engines import CannedPrompt, ConstantMetric, EchoSR
from .protocol import (
    BadRequest,
    encode_image_b64,
    parse_metric_request,
    parse_prompt_request,
    parse_sr_request,
)


class ServerStartupError(RuntimeError):
    """Configuration is valid but an engine cannot come up."""


def build_engines(config: ServerConfig) -> dict:
    """One engine per enabled role; prompt and critic may share a model."""
    engines: dict = {}
    if config.mode == "stub":
        canned = CannedPrompt(config.stub_prompt_text, config.stub_critic_text)
        if config.enabled("sr"):
            engines["sr"] = EchoSR()
        if config.enabled("prompt"):
            engines["prompt"] = canned
        if config.enabled("critic"):
            engines["critic"] = canned
        if config.enabled("metric"):
            engines["metric"] = ConstantMetric(config.stub_metrics,
                                               config.stub_default_metric)
        return engines

    from .hf import DiffusionSR, HfVlmPrompt, IqaMetric, RealEngineUnavailable

    try:
        if config.enabled("sr"):
            engines["sr"] = DiffusionSR(config.models["sr"], config.device)
        vlms: dict = {}
        for role in ("prompt", "critic"):
            if config.enabled(role):
                path = config.models[role]
                if path not in vlms:
                    vlms[path] = HfVlmPrompt(path, config.device)
                engines[role] = vlms[path]
        if config.enabled("metric"):
            engines["metric"] = IqaMetric(config.models["metric"], config.device)
    except RealEngineUnavailable as exc:
        raise ServerStartupError(str(exc)) from exc
    return engines


class _Handler(BaseHTTPRequestHandler):
    protocol_version = "HTTP/1.1"

    def log_message(self, fmt, *args):  # quiet by default
        pass

    def _reply(self, obj: dict, status: int = 200) -> None:
        body = json.dumps(obj, sort_keys=True).encode("utf-8")
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)

    def do_GET(self):
        server: "ModelServer" = self.server.owner
        if self.path == "/healthz":
            self._reply(server.health())
        else:
            self._reply({"error": f"unknown path {self.path!r}"}, status=404)

    def do_POST(self):
        server: "ModelServer" = self.server.owner
        handler = {
            "/v1/sr": server.handle_sr,
            "/v1/prompt": server.handle_prompt,
            "/v1/metric": server.handle_metric,
        }.get(self.path)
        if handler is None:
            self._reply({"error": f"unknown path {self.path!r}"}, status=404)
            return
        try:
            length = int(self.headers.get("Content-Length", "0"))
            payload = json.loads(self.rfile.read(length) or b"{}")
            if not isinstance(payload, dict):
                raise BadRequest("request body must be a JSON object")
        except (ValueError, BadRequest) as exc:
            self._reply({"error": f"bad request body: {exc}"}, status=400)
            return
        try:
            obj, status = handler(payload)
        except BadRequest as exc:
            obj, status = {"error": str(exc)}, 400
        except Exception as exc:  # engine fault; keep the server alive
            obj, status = {"error": f"engine failure: {exc}"}, 500
        self._reply(obj, status=status)


class ModelServer:
    """Owns the engines, the request limiter, and the per-device locks."""

    def __init__(self, config: ServerConfig):
        config.validate()
        self.config = config
        self.engines = build_engines(config)
        self._limiter = threading.BoundedSemaphore(config.max_concurrent)
        self._device_locks: dict[str, threading.Lock] = defaultdict(threading.Lock)
        self._httpd = ThreadingHTTPServer((config.host, config.port), _Handler)
        self._httpd.owner = self
        self._httpd.daemon_threads = True
        self._thread: threading.Thread | None = None
        host, port = self._httpd.server_address[:2]
        self.url = f"http://{host}:{port}"

    # role availability as served, not as configured: an enabled role whose
    # engine failed to build never reaches this point (startup error instead)
    def health(self) -> dict:
        from .config import ROLES

        return {role: role in self.engines for role in ROLES}

    def _run(self, role: str, fn, *args):
        device = self.config.device if self.config.mode == "real" else "none"
        with self._limiter, self._device_locks[device]:
            return fn(*args)

    def handle_sr(self, payload: dict) -> tuple[dict, int]:
        if "sr" not in self.engines:
            return {"error": "sr role disabled"}, 503
        req = parse_sr_request(payload)
        image, meta = self._run(
            "sr", self.engines["sr"].upscale, req.image, req.prompt, req.scale, req.seed
        )
        return {
            "request_id": req.request_id,
            "image_png_b64": encode_image_b64(image),
            "meta": meta,
        }, 200

    def handle_prompt(self, payload: dict) -> tuple[dict, int]:
        role = "critic" if payload.get("template_id") == "critic" else "prompt"
        if role not in self.engines:
            return {"error": f"{role} role disabled"}, 503
        req = parse_prompt_request(payload)
        text = self._run(
            role,
            self.engines[role].generate,
            req.images,
            req.template_id,
            req.template_text,
            req.description,
            req.temperature,
            req.max_tokens,
            req.seed,
        )
        return {"request_id": req.request_id, "text": str(text)}, 200

    def handle_metric(self, payload: dict) -> tuple[dict, int]:
        if "metric" not in self.engines:
            return {"error": "metric role disabled"}, 503
        req = parse_metric_request(payload)
        score = self._run("metric", self.engines["metric"].score, req.image, req.metric)
        return {"score": float(score)}, 200

    def start(self) -> "ModelServer":
        self._thread = threading.Thread(target=self._httpd.serve_forever, daemon=True)
        self._thread.start()
        return self

    def serve_forever(self) -> None:
        self._httpd.serve_forever()

    def close(self) -> None:
        self._httpd.shutdown()
        self._httpd.server_close()
