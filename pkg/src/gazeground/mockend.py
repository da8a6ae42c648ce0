"""Deterministic stand-in for a chat-completion endpoint.

Serves the same wire schema the client speaks and answers with a canned
report derived from the request content, so pipelines can run end to end
with no model behind them. Scriptable failure modes cover the retry paths:
rejecting temperature 0, timing out, or returning 429/500.

Run standalone with ``python -m gazeground.mockend --port 8123``.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import threading
import time
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer


def canned_report(payload: dict) -> str:
    """Deterministic pseudo-report keyed by the request content."""
    canon = json.dumps(payload.get("messages", []), sort_keys=True, ensure_ascii=False)
    tag = hashlib.sha256(canon.encode("utf-8")).hexdigest()[:12]
    method_hint = "with grounding cues" if "Fixation Data:" in canon else "from the plain radiograph"
    return (
        f"Synthetic report {tag}: the lungs are clear and the cardiomediastinal "
        f"silhouette is unremarkable, read {method_hint}."
    )


class MockEndpoint:
    """Threaded HTTP server implementing POST <prefix>/chat/completions.

    Behavior knobs:
      reject_temperature_zero: answer 400 (mentioning temperature) when
        temperature == 0, accept 0.1.
      fail_plan: list of status-or-"timeout" consumed one per request before
        normal service resumes (e.g. ["timeout", "timeout", 500]).
      fixed_reply: serve this text instead of the content-derived report.
    """

    def __init__(
        self,
        port: int = 0,
        reject_temperature_zero: bool = False,
        fail_plan: list | None = None,
        fixed_reply: str | None = None,
    ):
        self.reject_temperature_zero = reject_temperature_zero
        self.fail_plan = list(fail_plan or [])
        self.fixed_reply = fixed_reply
        self.request_count = 0
        self.seen_payloads: list[dict] = []
        self._lock = threading.Lock()

        mock = self

        class Handler(BaseHTTPRequestHandler):
            def log_message(self, *args):  # keep test output quiet
                pass

            def do_POST(self):
                if not self.path.endswith("/chat/completions"):
                    self.send_error(404)
                    return
                length = int(self.headers.get("Content-Length", 0))
                payload = json.loads(self.rfile.read(length))
                with mock._lock:
                    mock.request_count += 1
                    mock.seen_payloads.append(payload)
                    planned = mock.fail_plan.pop(0) if mock.fail_plan else None

                if planned == "timeout":
                    # Hold the socket long enough for the client timeout to fire.
                    time.sleep(5.0)
                    self.send_error(504)
                    return
                if isinstance(planned, int):
                    self._send_json(planned, {"error": {"message": f"scripted failure {planned}"}})
                    return
                if mock.reject_temperature_zero and payload.get("temperature") == 0:
                    self._send_json(
                        400,
                        {"error": {"message": "temperature 0 is not accepted by this deployment"}},
                    )
                    return
                text = mock.fixed_reply if mock.fixed_reply is not None else canned_report(payload)
                self._send_json(200, {"choices": [{"message": {"content": text}}]})

            def _send_json(self, status: int, obj: dict):
                body = json.dumps(obj).encode("utf-8")
                self.send_response(status)
                self.send_header("Content-Type", "application/json")
                self.send_header("Content-Length", str(len(body)))
                self.end_headers()
                self.wfile.write(body)

        class Server(ThreadingHTTPServer):
            daemon_threads = True  # don't block shutdown on handlers sleeping in "timeout" mode

        self._server = Server(("127.0.0.1", port), Handler)
        self._thread = threading.Thread(target=self._server.serve_forever, daemon=True)

    @property
    def port(self) -> int:
        return self._server.server_address[1]

    @property
    def base_url(self) -> str:
        return f"http://127.0.0.1:{self.port}/v1"

    def start(self) -> "MockEndpoint":
        self._thread.start()
        return self

    def stop(self) -> None:
        self._server.shutdown()
        self._server.server_close()

    def __enter__(self) -> "MockEndpoint":
        return self.start()

    def __exit__(self, *exc) -> None:
        self.stop()


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description="Run the mock chat-completion endpoint")
    parser.add_argument("--port", type=int, default=8123)
    parser.add_argument("--reject-temperature-zero", action="store_true")
    args = parser.parse_args(argv)
    server = MockEndpoint(port=args.port, reject_temperature_zero=args.reject_temperature_zero)
    server.start()
    print(f"mock endpoint listening on {server.base_url}", flush=True)
    try:
        while True:
            time.sleep(3600)
    except KeyboardInterrupt:
        server.stop()
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
