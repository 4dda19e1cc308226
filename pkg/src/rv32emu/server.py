"""Wire-protocol bindings: newline-delimited JSON over stdio, and a local
HTTP server exposing POST /session/{id}/command plus the static UI page.
"""

from __future__ import annotations

import json
import re
import threading
from http.server import SimpleHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path

from .session import Session

_SESSION_PATH = re.compile(r"^/session/([A-Za-z0-9_-]+)/command$")

_PLACEHOLDER_PAGE = b"""<!doctype html>
<html><head><title>rv32emu</title></head>
<body><h1>rv32emu protocol endpoint</h1>
<p>POST commands to <code>/session/{id}/command</code>.
Point <code>--ui</code> at a built frontend to serve the debugger page.</p>
</body></html>
"""


def proto_loop(stdin, stdout) -> int:
    """One session speaking newline-delimited JSON over the given streams."""
    session = Session()
    for line in stdin:
        line = line.strip()
        if not line:
            continue
        try:
            command = json.loads(line)
            if not isinstance(command, dict):
                raise ValueError("command must be a JSON object")
            response = session.handle_command(command)
        except (json.JSONDecodeError, ValueError) as exc:
            response = {"ok": False, "error": f"bad command: {exc}"}
        stdout.write(json.dumps(response) + "\n")
        stdout.flush()
    return 0


class SessionHub:
    """Sessions keyed by id, each with its own lock (commands serialize)."""

    def __init__(self):
        self._sessions: dict[str, tuple[Session, threading.Lock]] = {}
        self._guard = threading.Lock()

    def dispatch(self, session_id: str, command: dict) -> dict:
        with self._guard:
            if session_id not in self._sessions:
                self._sessions[session_id] = (Session(), threading.Lock())
            session, lock = self._sessions[session_id]
        with lock:
            return session.handle_command(command)


def make_handler(hub: SessionHub, ui_dir: str | None):
    ui_root = Path(ui_dir).resolve() if ui_dir else None

    class Handler(SimpleHTTPRequestHandler):
        protocol_version = "HTTP/1.1"

        def log_message(self, fmt, *args):
            pass

        def _send_json(self, payload: dict, status: int = 200):
            body = json.dumps(payload).encode("utf-8")
            self.send_response(status)
            self.send_header("Content-Type", "application/json")
            self.send_header("Content-Length", str(len(body)))
            self.send_header("Access-Control-Allow-Origin", "*")
            self.end_headers()
            self.wfile.write(body)

        def do_OPTIONS(self):
            self.send_response(204)
            self.send_header("Access-Control-Allow-Origin", "*")
            self.send_header("Access-Control-Allow-Methods", "POST, GET, OPTIONS")
            self.send_header("Access-Control-Allow-Headers", "Content-Type")
            self.send_header("Content-Length", "0")
            self.end_headers()

        def do_POST(self):
            match = _SESSION_PATH.match(self.path)
            if not match:
                self._send_json({"ok": False, "error": f"no such endpoint {self.path}"}, 404)
                return
            try:
                length = int(self.headers.get("Content-Length", "0"))
                command = json.loads(self.rfile.read(length).decode("utf-8"))
                if not isinstance(command, dict):
                    raise ValueError("command must be a JSON object")
            except (ValueError, json.JSONDecodeError) as exc:
                self._send_json({"ok": False, "error": f"bad command: {exc}"}, 400)
                return
            self._send_json(hub.dispatch(match.group(1), command))

        def do_GET(self):
            if ui_root is None:
                if self.path in ("/", "/index.html"):
                    self.send_response(200)
                    self.send_header("Content-Type", "text/html")
                    self.send_header("Content-Length", str(len(_PLACEHOLDER_PAGE)))
                    self.end_headers()
                    self.wfile.write(_PLACEHOLDER_PAGE)
                else:
                    self._send_json({"ok": False, "error": "not found"}, 404)
                return
            super().do_GET()

        def translate_path(self, path):
            # serve static files from the UI directory instead of cwd
            rel = path.split("?", 1)[0].split("#", 1)[0].lstrip("/") or "index.html"
            return str(ui_root / rel)

    return Handler


def serve(port: int = 8000, ui_dir: str | None = None, host: str = "127.0.0.1"):
    """Run the HTTP binding until interrupted; prints the bound address."""
    hub = SessionHub()
    httpd = ThreadingHTTPServer((host, port), make_handler(hub, ui_dir))
    actual_port = httpd.server_address[1]
    print(f"serving on http://{host}:{actual_port}", flush=True)
    try:
        httpd.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        httpd.server_close()
    return 0
