"""sdbotics: software-defined robotics stack.

Three layers: user programs come in over a REST northbound, the controller
compiles them into OpenBots packets and dispatches southbound over TCP,
and simulated vendor-heterogeneous robots translate and execute them in a
deterministic grid world.
"""

from sdbotics.codec import (
    ActionCode,
    MsgType,
    OpenBotsError,
    OpenBotsPacket,
    PacketStats,
    RobotCoefficients,
    decode_packet,
    encode_packet,
    validate_coefficients,
)

__version__ = "0.1.0"

__all__ = [
    "ActionCode",
    "MsgType",
    "OpenBotsError",
    "OpenBotsPacket",
    "PacketStats",
    "RobotCoefficients",
    "decode_packet",
    "encode_packet",
    "validate_coefficients",
    "__version__",
]
