"""Deterministic reference scorer for tests and offline pipelines: unigram F1.

Speaks the external-scorer wire protocol over stdin/stdout by default, or
over HTTP POST /score with --http. The score is the best token-level F1
against any reference, using the same tokenization as the native metrics,
so expected values are easy to compute by hand.
"""

from __future__ import annotations

import argparse
import json
import sys
from collections import Counter
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from typing import Sequence

from .metrics import tokenize


def unigram_f1(candidate: str, reference: str) -> float:
    cand = Counter(tokenize(candidate))
    ref = Counter(tokenize(reference))
    if not cand or not ref:
        return 0.0
    overlap = sum((cand & ref).values())
    if overlap == 0:
        return 0.0
    precision = overlap / sum(cand.values())
    recall = overlap / sum(ref.values())
    return 2.0 * precision * recall / (precision + recall)


def best_unigram_f1(candidate: str, references: Sequence[str]) -> float:
    if not references:
        return 0.0
    return max(unigram_f1(candidate, ref) for ref in references)


def score_lines(lines) -> list[str]:
    out = []
    for line in lines:
        line = line.strip()
        if not line:
            continue
        req = json.loads(line)
        score = best_unigram_f1(req["candidate"], req["references"])
        out.append(json.dumps({"id": req["id"], "score": score}))
    return out


def _serve_http(port: int) -> None:
    class Handler(BaseHTTPRequestHandler):
        def log_message(self, *args):
            pass

        def do_POST(self):
            if not self.path.endswith("/score"):
                self.send_error(404)
                return
            length = int(self.headers.get("Content-Length", 0))
            body = self.rfile.read(length).decode("utf-8")
            reply = ("\n".join(score_lines(body.splitlines())) + "\n").encode("utf-8")
            self.send_response(200)
            self.send_header("Content-Type", "application/x-ndjson")
            self.send_header("Content-Length", str(len(reply)))
            self.end_headers()
            self.wfile.write(reply)

    server = ThreadingHTTPServer(("127.0.0.1", port), Handler)
    print(f"mock scorer listening on http://127.0.0.1:{server.server_address[1]}/score", flush=True)
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        server.server_close()


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description="Unigram-F1 mock scorer")
    parser.add_argument("--http", action="store_true", help="serve HTTP instead of stdio")
    parser.add_argument("--port", type=int, default=0)
    args = parser.parse_args(argv)
    if args.http:
        _serve_http(args.port)
        return 0
    for line in score_lines(sys.stdin):
        print(line)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
