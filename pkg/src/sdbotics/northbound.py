"""Northbound REST API over the controller.

JSON in, JSON out. Every error body is {"error": <code>, "detail": ...}
with a machine-readable code; the HTTP status is derived from the code.
Handlers run on the threading HTTP server and only touch the controller
through its locked methods.

Routes (all under /api/v1):
  POST   /programs            submit a program        -> 202 dispatch report
  GET    /robots              registered robots       -> 200 list
  DELETE /robots/{id}         deregister              -> 204
  GET    /stats               counters snapshot       -> 200
  GET    /map                 global pose map         -> 200
  GET    /groups              group listing           -> 200
  POST   /groups              define/replace a group  -> 200
  DELETE /groups/{name}       remove a group          -> 204
  GET    /path?src=&dst=      topology route          -> 200
  GET    /data/{id}           drain SEND mailbox      -> 200 list
"""

from __future__ import annotations

import json
import re
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from urllib.parse import parse_qs, urlsplit

from sdbotics.controller import Controller, ControllerError
from sdbotics.topology import TopologyError

DEFAULT_HTTP_PORT = 8080

_STATUS_BY_CODE = {
    "VALIDATION_FAILED": 400,
    "EMPTY_GROUP": 400,
    "MALFORMED_HELLO": 400,
    "MALFORMED_POSE": 400,
    "UNREACHABLE": 400,
    "BAD_REQUEST": 400,
    "UNKNOWN_TARGET": 404,
    "UNKNOWN_ROBOT": 404,
    "UNKNOWN_GROUP": 404,
    "UNKNOWN_NODE": 404,
    "NOT_FOUND": 404,
    "DUPLICATE_ID": 409,
}


class ApiError(Exception):
    def __init__(self, code: str, detail=None):
        super().__init__(code)
        self.code = code
        self.detail = detail


def _report_detail(exc: Exception):
    if hasattr(exc, "issues"):
        return exc.issues
    return str(exc)


# route table: (method, compiled pattern, handler(ctl, match, query, body) -> (status, payload))

def _programs(ctl: Controller, m, q, body):
    if not isinstance(body, dict):
        raise ApiError("BAD_REQUEST", "body must be a JSON object")
    target = body.get("target")
    rows = body.get("rows")
    if not isinstance(target, str) or not isinstance(rows, list):
        raise ApiError("BAD_REQUEST", "body needs string 'target' and list 'rows'")
    if not rows:
        raise ApiError("VALIDATION_FAILED", [{"row": None, "violations": [
            {"field": "rows", "value": "[]", "allowed": "at least one row"}]}])
    report = ctl.dispatch(target, rows)
    return 202, report


def _robots(ctl, m, q, body):
    return 200, ctl.robots_view()


def _deregister(ctl, m, q, body):
    ctl.deregister_robot(int(m.group(1)))
    return 204, None


def _stats(ctl, m, q, body):
    return 200, ctl.stats_snapshot()


def _map(ctl, m, q, body):
    return 200, ctl.map_view()


def _groups_get(ctl, m, q, body):
    return 200, ctl.groups_view()


def _groups_post(ctl, m, q, body):
    if not isinstance(body, dict):
        raise ApiError("BAD_REQUEST", "body must be a JSON object")
    name = body.get("name")
    ids = body.get("ids")
    if not isinstance(name, str) or not isinstance(ids, list) \
            or not all(isinstance(i, int) and not isinstance(i, bool) for i in ids):
        raise ApiError("BAD_REQUEST", "body needs string 'name' and integer list 'ids'")
    ctl.define_group(name, ids)
    return 200, {"group": name, "ids": sorted(set(ids))}


def _groups_delete(ctl, m, q, body):
    ctl.remove_group(m.group(1))
    return 204, None


def _path(ctl, m, q, body):
    src = q.get("src", [None])[0]
    dst = q.get("dst", [None])[0]
    if not src or not dst:
        raise ApiError("BAD_REQUEST", "query needs src and dst")
    return 200, ctl.path_view(src, dst)


def _data(ctl, m, q, body):
    return 200, ctl.drain_mailbox(int(m.group(1)))


_ROUTES = [
    ("POST", re.compile(r"^/api/v1/programs$"), _programs),
    ("GET", re.compile(r"^/api/v1/robots$"), _robots),
    ("DELETE", re.compile(r"^/api/v1/robots/(\d+)$"), _deregister),
    ("GET", re.compile(r"^/api/v1/stats$"), _stats),
    ("GET", re.compile(r"^/api/v1/map$"), _map),
    ("GET", re.compile(r"^/api/v1/groups$"), _groups_get),
    ("POST", re.compile(r"^/api/v1/groups$"), _groups_post),
    ("DELETE", re.compile(r"^/api/v1/groups/([^/]+)$"), _groups_delete),
    ("GET", re.compile(r"^/api/v1/path$"), _path),
    ("GET", re.compile(r"^/api/v1/data/(\d+)$"), _data),
]


class _Handler(BaseHTTPRequestHandler):
    protocol_version = "HTTP/1.1"

    # silence per-request stderr logging
    def log_message(self, fmt, *args):
        pass

    def _dispatch(self, method: str) -> None:
        url = urlsplit(self.path)
        query = parse_qs(url.query)
        body = None
        length = int(self.headers.get("Content-Length") or 0)
        raw = self.rfile.read(length) if length else b""
        if method in ("POST", "PUT") or raw:
            if raw:
                try:
                    body = json.loads(raw)
                except ValueError:
                    self._reply(400, {"error": "BAD_REQUEST", "detail": "body is not valid JSON"})
                    return
        for route_method, pattern, handler in _ROUTES:
            if route_method != method:
                continue
            m = pattern.match(url.path)
            if not m:
                continue
            try:
                status, payload = handler(self.server.controller, m, query, body)
            except ApiError as exc:
                self._reply(_STATUS_BY_CODE.get(exc.code, 400),
                            {"error": exc.code, "detail": exc.detail})
            except (ControllerError, TopologyError) as exc:
                code = getattr(exc, "code", "CONTROLLER_ERROR")
                self._reply(_STATUS_BY_CODE.get(code, 400),
                            {"error": code, "detail": _report_detail(exc)})
            except ValueError as exc:
                self._reply(400, {"error": "BAD_REQUEST", "detail": str(exc)})
            else:
                self._reply(status, payload)
            return
        self._reply(404, {"error": "NOT_FOUND", "detail": f"no route for {method} {url.path}"})

    def _reply(self, status: int, payload) -> None:
        body = b"" if payload is None else json.dumps(payload).encode("utf-8")
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        if body:
            self.wfile.write(body)

    def do_GET(self):
        self._dispatch("GET")

    def do_POST(self):
        self._dispatch("POST")

    def do_DELETE(self):
        self._dispatch("DELETE")


class NorthboundServer:
    def __init__(self, controller: Controller, host: str = "127.0.0.1", port: int = DEFAULT_HTTP_PORT):
        self._httpd = ThreadingHTTPServer((host, port), _Handler)
        self._httpd.controller = controller
        self._httpd.daemon_threads = True
        self.host, self.port = self._httpd.server_address[:2]
        self._thread: threading.Thread | None = None

    def start(self) -> None:
        self._thread = threading.Thread(target=lambda: self._httpd.serve_forever(poll_interval=0.05),
                                        name="northbound-http", daemon=True)
        self._thread.start()

    def stop(self) -> None:
        self._httpd.shutdown()
        self._httpd.server_close()
        if self._thread:
            self._thread.join(timeout=2)
