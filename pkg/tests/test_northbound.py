"""REST API surface: routes, status codes, and error bodies."""

from __future__ import annotations

import json
import urllib.error
import urllib.request

import pytest

from sdbotics.codec import MsgType, OpenBotsPacket, PacketStats, RobotCoefficients
from sdbotics.controller import Controller
from sdbotics.northbound import NorthboundServer


def hello(robot_id: int, vendor="VendorA") -> OpenBotsPacket:
    return OpenBotsPacket(
        msg_type=MsgType.HELLO,
        coefficients=RobotCoefficients(robot_id=robot_id, data=vendor),
        stats=PacketStats(sequence=1, counter=1),
    )


class Api:
    def __init__(self, base: str):
        self.base = base

    def request(self, method: str, path: str, body=None):
        data = json.dumps(body).encode() if body is not None else None
        req = urllib.request.Request(self.base + path, data=data, method=method,
                                     headers={"Content-Type": "application/json"})
        try:
            with urllib.request.urlopen(req, timeout=5) as resp:
                raw = resp.read()
                return resp.status, json.loads(raw) if raw else None
        except urllib.error.HTTPError as err:
            raw = err.read()
            return err.code, json.loads(raw) if raw else None

    def get(self, path):
        return self.request("GET", path)

    def post(self, path, body):
        return self.request("POST", path, body)

    def delete(self, path):
        return self.request("DELETE", path)


@pytest.fixture()
def api():
    ctl = Controller(mode="cloud", send=lambda rid, frame: None)
    srv = NorthboundServer(ctl, port=0)
    srv.start()
    yield ctl, Api(f"http://127.0.0.1:{srv.port}")
    srv.stop()


ROW_ON = ["R3", 2, 1, 0, 1, 1, "192.168.0.3", "", "ON"]


class TestPrograms:
    def test_submit_returns_202_report(self, api):
        ctl, http = api
        ctl.register_robot(hello(3), address="test")
        status, report = http.post("/api/v1/programs", {"target": "robot:3", "rows": [ROW_ON]})
        assert status == 202
        assert report["robots"]["3"]["packets"] == 1
        assert report["packets_total"] == 1

    def test_validation_error_names_row_and_field(self, api):
        ctl, http = api
        ctl.register_robot(hello(3), address="test")
        bad = ["R3", 1, 1, 999, 1, 1, "192.168.0.3", "", "ON"]
        status, body = http.post("/api/v1/programs", {"target": "robot:3", "rows": [ROW_ON, bad]})
        assert status == 400
        assert body["error"] == "VALIDATION_FAILED"
        assert body["detail"][0]["row"] == 1
        assert body["detail"][0]["violations"][0]["field"] == "angle"

    def test_unknown_target_404(self, api):
        _, http = api
        status, body = http.post("/api/v1/programs", {"target": "robot:99", "rows": [ROW_ON]})
        assert status == 404 and body["error"] == "UNKNOWN_ROBOT"
        status, body = http.post("/api/v1/programs", {"target": "nonsense", "rows": [ROW_ON]})
        assert status == 404 and body["error"] == "UNKNOWN_TARGET"

    def test_empty_rows_rejected(self, api):
        ctl, http = api
        ctl.register_robot(hello(3), address="test")
        status, body = http.post("/api/v1/programs", {"target": "robot:3", "rows": []})
        assert status == 400 and body["error"] == "VALIDATION_FAILED"

    def test_malformed_body(self, api):
        _, http = api
        status, body = http.post("/api/v1/programs", {"target": "robot:3"})
        assert status == 400 and body["error"] == "BAD_REQUEST"


class TestReads:
    def test_fresh_robots_empty(self, api):
        _, http = api
        assert http.get("/api/v1/robots") == (200, [])

    def test_robots_after_registration(self, api):
        ctl, http = api
        ctl.register_robot(hello(3), address="test")
        status, robots = http.get("/api/v1/robots")
        assert status == 200
        assert robots[0]["robot_id"] == 3 and robots[0]["vendor"] == "VendorA"

    def test_stats_and_map(self, api):
        ctl, http = api
        status, stats = http.get("/api/v1/stats")
        assert status == 200 and stats["registered"] == 0
        status, pose_map = http.get("/api/v1/map")
        assert status == 200 and pose_map == {}

    def test_identical_gets_between_mutations(self, api):
        ctl, http = api
        ctl.register_robot(hello(3), address="test")
        assert http.get("/api/v1/robots") == http.get("/api/v1/robots")
        assert http.get("/api/v1/stats") == http.get("/api/v1/stats")


class TestGroups:
    def test_define_list_delete(self, api):
        ctl, http = api
        for rid in (2, 4):
            ctl.register_robot(hello(rid), address="test")
        status, body = http.post("/api/v1/groups", {"name": "left", "ids": [2, 4]})
        assert status == 200 and body == {"group": "left", "ids": [2, 4]}
        assert http.get("/api/v1/groups") == (200, {"left": [2, 4]})
        status, _ = http.delete("/api/v1/groups/left")
        assert status == 204
        assert http.get("/api/v1/groups") == (200, {})

    def test_unknown_member_404(self, api):
        _, http = api
        status, body = http.post("/api/v1/groups", {"name": "x", "ids": [99]})
        assert status == 404 and body["error"] == "UNKNOWN_ROBOT" and "99" in str(body["detail"])

    def test_empty_ids_400(self, api):
        _, http = api
        status, body = http.post("/api/v1/groups", {"name": "x", "ids": []})
        assert status == 400 and body["error"] == "EMPTY_GROUP"

    def test_delete_unknown_group(self, api):
        _, http = api
        status, body = http.delete("/api/v1/groups/ghost")
        assert status == 404 and body["error"] == "UNKNOWN_GROUP"


class TestPathAndData:
    def test_triangle_path(self):
        links = [("C", "1", 5.0), ("C", "2", 1.0), ("2", "1", 1.0)]
        ctl = Controller(mode="cloud", links=links, send=lambda rid, frame: None)
        srv = NorthboundServer(ctl, port=0)
        srv.start()
        try:
            http = Api(f"http://127.0.0.1:{srv.port}")
            assert http.get("/api/v1/path?src=C&dst=1") == (
                200, {"path": ["C", "2", "1"], "cost": 2.0})
        finally:
            srv.stop()

    def test_path_errors(self, api):
        _, http = api
        status, body = http.get("/api/v1/path?src=C&dst=9")
        assert status == 404 and body["error"] == "UNKNOWN_NODE"
        status, body = http.get("/api/v1/path?src=C")
        assert status == 400 and body["error"] == "BAD_REQUEST"

    def test_data_drains(self, api):
        ctl, http = api
        ctl.register_robot(hello(3), address="test")
        ctl.mailboxes[3].append("DONE")
        assert http.get("/api/v1/data/3") == (200, ["DONE"])
        assert http.get("/api/v1/data/3") == (200, [])

    def test_data_unknown_robot(self, api):
        _, http = api
        status, body = http.get("/api/v1/data/9")
        assert status == 404 and body["error"] == "UNKNOWN_ROBOT"


class TestDeregister:
    def test_delete_robot(self, api):
        ctl, http = api
        ctl.register_robot(hello(3), address="test")
        status, _ = http.delete("/api/v1/robots/3")
        assert status == 204
        assert http.get("/api/v1/robots") == (200, [])

    def test_delete_unknown_robot(self, api):
        _, http = api
        status, body = http.delete("/api/v1/robots/3")
        assert status == 404 and body["error"] == "UNKNOWN_ROBOT"


class TestRouting404:
    def test_unknown_route(self, api):
        _, http = api
        status, body = http.get("/api/v1/nothing")
        assert status == 404 and body["error"] == "NOT_FOUND"
