"""The protocol loop: register/predict messages in, one reply line per batch.

Responses within a predictions message keep request order.  A failing
request yields an error line before the batch's predictions line; a
malformed input line yields an error line naming the line number, and the
loop continues.
"""

from __future__ import annotations

import json
import sys
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

from .features import HeldInstance


class ProtocolSession:
    """State for one connection: registered instances plus the model."""

    def __init__(self, model, config):
        self.model = model
        self.config = config
        self.instances = {}

    def handle(self, message: dict) -> list:
        """One inbound message to a list of outbound messages."""
        kind = message.get("type")
        if kind == "register":
            try:
                instance = HeldInstance.from_payload(message.get("instance") or {})
            except ValueError as exc:
                return [{"type": "error", "message": str(exc)}]
            self.instances[instance.id] = instance
            return [{"type": "registered", "instance_id": instance.id}]
        if kind == "predict":
            return self._predict(message.get("requests") or [])
        return [{"type": "error", "message": f"unknown message type {kind!r}"}]

    def _predict(self, requests) -> list:
        out = []
        results = []
        for request in requests:
            request_id = request.get("request_id") if isinstance(request, dict) else None
            try:
                if not isinstance(request, dict):
                    raise ValueError("request must be an object")
                instance = self.instances.get(str(request.get("instance_id")))
                if instance is None:
                    raise ValueError(f"unregistered instance {request.get('instance_id')!r}")
                probabilities = self.model.predict(instance, request, self.config)
            except (ValueError, KeyError, TypeError) as exc:
                out.append({"type": "error", "request_id": request_id, "message": str(exc)})
                continue
            results.append({"request_id": request_id, "probabilities": probabilities})
        out.append({"type": "predictions", "results": results})
        return out


def handle_line(session: ProtocolSession, line: str, line_number: int) -> list:
    """Parse one raw input line; malformed lines answer with an error."""
    line = line.strip()
    if not line:
        return []
    try:
        message = json.loads(line)
        if not isinstance(message, dict):
            raise ValueError("message must be a JSON object")
    except (json.JSONDecodeError, ValueError) as exc:
        return [{"type": "error", "message": f"malformed request on line {line_number}: {exc}"}]
    return session.handle(message)


def serve_stdio(model, config, stdin=None, stdout=None) -> int:
    stdin = stdin if stdin is not None else sys.stdin
    stdout = stdout if stdout is not None else sys.stdout
    session = ProtocolSession(model, config)
    for line_number, line in enumerate(stdin, start=1):
        for reply in handle_line(session, line, line_number):
            stdout.write(json.dumps(reply) + "\n")
        stdout.flush()
    return 0


def serve_http(model, config) -> int:
    session = ProtocolSession(model, config)

    class Handler(BaseHTTPRequestHandler):
        def do_POST(self):
            length = int(self.headers.get("Content-Length", "0"))
            replies = handle_line(session, self.rfile.read(length).decode("utf-8"), 1)
            # HTTP carries one message per body; fold error+predictions
            # sequences by answering with the first error, if any.
            errors = [r for r in replies if r.get("type") == "error"]
            reply = errors[0] if errors else (replies[-1] if replies else {"type": "error", "message": "empty request"})
            body = json.dumps(reply).encode("utf-8")
            self.send_response(200)
            self.send_header("Content-Type", "application/json")
            self.send_header("Content-Length", str(len(body)))
            self.end_headers()
            self.wfile.write(body)

        def log_message(self, *args):
            pass

    server = ThreadingHTTPServer((config.host, config.port), Handler)
    print(f"serving on http://{config.host}:{server.server_address[1]}/", file=sys.stderr)
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.server_close()
    return 0
