"""Transports serving a registry: threaded HTTP and newline-delimited streams."""

from __future__ import annotations

import logging
import time
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from threading import Thread
from typing import Optional, TextIO

from .codec import decode_request
from .registry import Registry, dispatch

logger = logging.getLogger(__name__)

DEFAULT_RPC_PATH = "/rpc"


class _Handler(BaseHTTPRequestHandler):
    # set by the server factory
    registry: Registry = None  # type: ignore[assignment]
    rpc_path: str = DEFAULT_RPC_PATH

    def do_POST(self):  # noqa: N802 - http.server naming
        if self.path != self.rpc_path:
            self.send_error(404, "unknown path")
            return
        length = int(self.headers.get("Content-Length", 0))
        body = self.rfile.read(length)
        started = time.perf_counter()
        reply = dispatch(self.registry, body)
        elapsed_ms = (time.perf_counter() - started) * 1000.0
        self._log_call(body, reply, elapsed_ms)
        self.send_response(200)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(reply)))
        self.end_headers()
        self.wfile.write(reply)

    def _log_call(self, body: bytes, reply: bytes, elapsed_ms: float) -> None:
        try:
            method, params, _ = decode_request(body)
            tool = params.get("tool_name", "-") if method != "tools/list" else "-"
        except Exception:
            method, tool = "malformed", "-"
        status = "ERROR" if b'"ERROR"' in reply or b'"error"' in reply else "OK"
        logger.info("%s tool=%s status=%s latency_ms=%.2f", method, tool, status, elapsed_ms)

    def log_message(self, format, *args):  # silence per-request stderr noise
        pass


class ExpertHttpServer:
    """Loopback-friendly HTTP server: one JSON-RPC envelope per POST.

    The registry is shared read-only across handler threads; start/stop are
    idempotent and the instance works as a context manager.
    """

    def __init__(
        self,
        registry: Registry,
        host: str = "127.0.0.1",
        port: int = 0,
        rpc_path: str = DEFAULT_RPC_PATH,
    ):
        handler = type("BoundHandler", (_Handler,), {"registry": registry, "rpc_path": rpc_path})
        self._server = ThreadingHTTPServer((host, port), handler)
        self._server.daemon_threads = True
        self._thread: Optional[Thread] = None
        self.rpc_path = rpc_path

    @property
    def host(self) -> str:
        return self._server.server_address[0]

    @property
    def port(self) -> int:
        return self._server.server_address[1]

    @property
    def endpoint(self) -> str:
        return f"http://{self.host}:{self.port}{self.rpc_path}"

    def start(self) -> "ExpertHttpServer":
        if self._thread is None:
            self._thread = Thread(target=self._server.serve_forever, daemon=True)
            self._thread.start()
            logger.info("serving on %s", self.endpoint)
        return self

    def stop(self) -> None:
        if self._thread is not None:
            self._server.shutdown()
            self._thread.join()
            self._thread = None
        self._server.server_close()

    def serve_forever(self) -> None:
        """Blocking serve loop for the CLI; stop() still works from signals."""
        logger.info("serving on %s", self.endpoint)
        self._server.serve_forever()

    def __enter__(self) -> "ExpertHttpServer":
        return self.start()

    def __exit__(self, *exc) -> None:
        self.stop()


def serve_stream(registry: Registry, in_stream: TextIO, out_stream: TextIO) -> None:
    """Newline-delimited transport: one envelope per line, reply per line.

    Used for locally spawned expert processes and in-memory tests; returns
    at end of input.
    """
    for line in in_stream:
        line = line.strip()
        if not line:
            continue
        reply = dispatch(registry, line.encode("utf-8"))
        out_stream.write(reply.decode("utf-8") + "\n")
        out_stream.flush()
