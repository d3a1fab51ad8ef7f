"""Vendor translation: definitional table entries, totality, determinism,
and parse/format round-trips."""

from __future__ import annotations

import pytest

from sdbotics.codec import ActionCode, MsgType, OpenBotsPacket, RobotCoefficients
from sdbotics.vendors import (
    GENERIC,
    PROFILES,
    VENDOR_A,
    VENDOR_B,
    Op,
    Untranslatable,
    VendorProfile,
    get_profile,
    row_ops,
    translate,
)


def command(action: ActionCode, speed=1, dir=1, angle=0, sensor=1, actuator=1, data="") -> OpenBotsPacket:
    return OpenBotsPacket(
        msg_type=MsgType.COMMAND,
        coefficients=RobotCoefficients(
            robot_id=3, speed=speed, dir=dir, angle=angle,
            sensor=sensor, actuator=actuator, ip_addr="192.168.0.3", data=data,
        ),
        action=action,
    )


class TestDefinitionalEntries:
    def test_on_vendor_a(self):
        assert translate(command(ActionCode.ON), VENDOR_A) == ["PWR 1"]

    def test_on_vendor_b(self):
        assert translate(command(ActionCode.ON), VENDOR_B) == ["0x10 0x01"]

    def test_on_with_motion(self):
        assert translate(command(ActionCode.ON, speed=2), VENDOR_A) == ["PWR 1", "MOV F 1"]
        assert translate(command(ActionCode.ON, speed=2), VENDOR_B) == ["0x10 0x01", "0x30 0x02 0x01"]

    def test_off(self):
        assert translate(command(ActionCode.OFF), VENDOR_A) == ["PWR 0"]
        assert translate(command(ActionCode.OFF), VENDOR_B) == ["0x10 0x00"]

    def test_touch_carries_completion_motion(self):
        # the motion instruction after TCH is what stops (speed 1) or
        # re-speeds the robot once the sensor fires
        assert translate(command(ActionCode.TOUCH), VENDOR_A) == ["TCH 1", "MOV F 0"]
        assert translate(command(ActionCode.TOUCH, speed=3), VENDOR_A) == ["TCH 1", "MOV F 2"]

    def test_rendezvous(self):
        pkt = command(ActionCode.RENDEZVOUS, speed=2, angle=180)
        assert translate(pkt, VENDOR_A) == ["ROT 180", "HOM 1"]
        assert translate(pkt, VENDOR_B) == ["0x20 0xb4", "0x80 0x02"]

    def test_send_payload(self):
        pkt = command(ActionCode.SEND, data="DONE")
        assert translate(pkt, VENDOR_A) == ["MOV F 0", "TXD DONE"]
        assert translate(pkt, VENDOR_B) == ["0x30 0x01 0x01", "0x70 0x44 0x4f 0x4e 0x45"]

    def test_grasp_drop_see(self):
        assert "GRP CLOSE" in translate(command(ActionCode.GRASP), VENDOR_A)
        assert "GRP OPEN" in translate(command(ActionCode.DROP), VENDOR_A)
        assert "CAM SNAP" in translate(command(ActionCode.SEE), VENDOR_A)


class TestTotality:
    @pytest.mark.parametrize("name", sorted(PROFILES))
    def test_every_action_translates(self, name):
        profile = PROFILES[name]
        profile.check_total()
        for action in ActionCode:
            data = "x" if action is ActionCode.SEND else ""
            out = translate(command(action, speed=2, angle=45, data=data), profile)
            assert out and all(isinstance(s, str) and s for s in out)

    def test_gapped_profile_raises(self):
        broken = VendorProfile("broken", {"power": lambda op: "P"}, VENDOR_A.parse)
        with pytest.raises(Untranslatable):
            broken.check_total()
        with pytest.raises(Untranslatable):
            translate(command(ActionCode.SEE), broken)

    def test_unknown_profile_name(self):
        with pytest.raises(Untranslatable):
            get_profile("VendorZ")


class TestDeterminism:
    def test_same_row_same_instructions(self):
        pkt = command(ActionCode.RENDEZVOUS, speed=3, dir=2, angle=90)
        for profile in PROFILES.values():
            assert translate(pkt, profile) == translate(pkt, profile)


class TestParseRoundTrip:
    # every emitted instruction must parse back to the op that produced it
    PATTERNS = [
        dict(speed=1, dir=1, angle=0),
        dict(speed=2, dir=1, angle=0),
        dict(speed=3, dir=2, angle=90),
        dict(speed=5, dir=2, angle=180),
    ]

    @pytest.mark.parametrize("name", sorted(PROFILES))
    def test_round_trip_all_actions(self, name):
        profile = PROFILES[name]
        for action in ActionCode:
            for pat in self.PATTERNS:
                data = "hello world" if action is ActionCode.SEND else ""
                c = RobotCoefficients(robot_id=3, sensor=1, actuator=1, data=data, **pat)
                ops = row_ops(action, c)
                parsed = [profile.parse(profile.format_op(op)) for op in ops]
                assert parsed == ops

    def test_vendor_a_send_keeps_spaces(self):
        assert VENDOR_A.parse("TXD one two  three") == Op("send", ("one two  three",))

    def test_parse_garbage(self):
        with pytest.raises(Untranslatable):
            VENDOR_A.parse("XYZ 1")
        with pytest.raises(Untranslatable):
            VENDOR_B.parse("0xff")
        with pytest.raises(Untranslatable):
            VENDOR_B.parse("not hex")


class TestRowOps:
    def test_power_on_resets_motion_so_stop_pattern_is_bare(self):
        ops = row_ops(ActionCode.ON, RobotCoefficients(robot_id=1))
        assert ops == [Op("power", (1,))]

    def test_rotation_emitted_before_action_body(self):
        ops = row_ops(ActionCode.GRASP, RobotCoefficients(robot_id=1, angle=90))
        assert ops[0] == Op("rotate", (90,))

    def test_on_powers_before_rotating(self):
        ops = row_ops(ActionCode.ON, RobotCoefficients(robot_id=1, angle=90))
        assert [op.kind for op in ops] == ["power", "rotate"]
