"""Thin HTTP client for the controller's northbound API.

The public names are CamelCase on purpose: they mirror the published
application API (`Init`, `PopulateData`) so examples paste directly.
The client holds configuration only; every method maps to exactly one
HTTP request, and rows are submitted verbatim, field for field, never
reordered or rewritten.
"""

from __future__ import annotations

import json
import urllib.error
import urllib.parse
import urllib.request
from dataclasses import dataclass
from typing import Any, Iterable, Sequence


class SdkError(Exception):
    code = "SDK_ERROR"

    def __init__(self, message: str, detail: Any = None):
        super().__init__(message)
        self.detail = detail


class ConnectFailed(SdkError):
    code = "CONNECT_FAILED"


class ValidationFailed(SdkError):
    code = "VALIDATION_FAILED"


class UnknownTarget(SdkError):
    code = "UNKNOWN_TARGET"


def _error_from_response(status: int, raw: bytes) -> SdkError:
    try:
        body = json.loads(raw)
        code = body.get("error", f"HTTP_{status}")
        detail = body.get("detail")
    except ValueError:
        code, detail = f"HTTP_{status}", raw.decode("utf-8", errors="replace")
    message = f"{code}: {json.dumps(detail)}" if detail is not None else code
    if code == "VALIDATION_FAILED":
        err = ValidationFailed(message, detail)
    elif code.startswith("UNKNOWN_"):
        err = UnknownTarget(message, detail)
    else:
        err = SdkError(message, detail)
    err.code = code
    return err


@dataclass(frozen=True)
class SdboticsClient:
    """Configuration-only handle; safe to share across threads."""

    base_url: str
    target: str = "all"
    timeout: float = 10.0

    def _request(self, method: str, path: str, body: dict | None = None) -> Any:
        data = json.dumps(body).encode("utf-8") if body is not None else None
        req = urllib.request.Request(self.base_url + path, data=data, method=method,
                                     headers={"Content-Type": "application/json"})
        try:
            with urllib.request.urlopen(req, timeout=self.timeout) as resp:
                return json.loads(resp.read())
        except urllib.error.HTTPError as err:
            raise _error_from_response(err.code, err.read()) from err
        except (urllib.error.URLError, OSError) as err:
            raise ConnectFailed(f"{method} {self.base_url}{path}: {err}") from err

    def Robots(self) -> list[dict]:
        return self._request("GET", "/api/v1/robots")

    def Stats(self) -> dict:
        return self._request("GET", "/api/v1/stats")

    def Map(self) -> dict:
        return self._request("GET", "/api/v1/map")

    def Groups(self) -> dict:
        return self._request("GET", "/api/v1/groups")

    def Path(self, src: str, dst: str) -> dict:
        query = urllib.parse.urlencode({"src": src, "dst": dst})
        return self._request("GET", f"/api/v1/path?{query}")

    def Data(self, robot_id: int) -> list[str]:
        return self._request("GET", f"/api/v1/data/{int(robot_id)}")

    def PopulateData(self, rows: Iterable[Sequence], target: str | None = None) -> dict:
        """Submit program rows; returns the dispatch report.

        Rows are 9-tuples in the published order (robotID, speed, dir,
        angle, sensor, actuator, ip-addr, data, action). Empty input is
        rejected locally, before any request is made.
        """
        rows = [list(row) for row in rows]
        if not rows:
            raise ValidationFailed("VALIDATION_FAILED: rows must be non-empty",
                                   [{"row": None, "violations": [
                                       {"field": "rows", "value": [], "allowed": "non-empty list"}]}])
        body = {"target": target if target is not None else self.target, "rows": rows}
        return self._request("POST", "/api/v1/programs", body)
