"""Applications-layer client for an sdbotics controller.

Mirrors the published two-call flow:

    import sdbotics_sdk as sdbotics

    sdbotics.Init("http://127.0.0.1:8080")
    report = sdbotics.PopulateData(rows, target="robot:3")

`Init` binds a module-level default client after a connectivity probe;
`PopulateData` submits rows through it. Both are also available on
`SdboticsClient` for callers juggling several controllers.
"""

from __future__ import annotations

from typing import Iterable, Sequence

from sdbotics_sdk.client import (
    ConnectFailed,
    SdboticsClient,
    SdkError,
    UnknownTarget,
    ValidationFailed,
)

__all__ = [
    "ConnectFailed",
    "Init",
    "PopulateData",
    "SdboticsClient",
    "SdkError",
    "UnknownTarget",
    "ValidationFailed",
]

_default_client: SdboticsClient | None = None


def Init(url: str, target: str = "all", timeout: float = 10.0) -> SdboticsClient:
    """Construct a client and probe the controller with one GET /robots.

    The returned client also becomes the module default used by
    PopulateData. Raises ConnectFailed when the controller is unreachable.
    """
    global _default_client
    client = SdboticsClient(base_url=url.rstrip("/"), target=target, timeout=timeout)
    client.Robots()
    _default_client = client
    return client


def PopulateData(rows: Iterable[Sequence], target: str | None = None) -> dict:
    """Submit rows through the client bound by the last Init call."""
    if _default_client is None:
        raise ConnectFailed("no controller bound; call Init(url) first")
    return _default_client.PopulateData(rows, target)
