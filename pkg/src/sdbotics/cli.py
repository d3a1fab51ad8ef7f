"""Operator command line.

Subcommands:
  controller    host the controller (southbound TCP + northbound HTTP)
  sim           run a world file's robots against a controller
  run           submit a mission file, print the dispatch report
  robots|stats|map|groups
                query controller state (--json for machine output)
  path SRC DST  print the routed path between two topology nodes
  packet dump   decode a packet file as an annotated hexdump

Exit codes: 0 success, 1 validation or controller-reported error,
2 connectivity failure. Machine output (--json and the `run` report)
goes to stdout; human-oriented text goes to stderr so pipelines stay
clean.
"""

from __future__ import annotations

import argparse
import json
import os
import signal
import sys
import threading
import urllib.error
import urllib.request

from sdbotics.codec import hexdump
from sdbotics.controller import Controller
from sdbotics.entities import RegistrationRefused, run_fleet
from sdbotics.northbound import DEFAULT_HTTP_PORT, NorthboundServer
from sdbotics.transport import DEFAULT_BOTS_PORT, SouthboundServer
from sdbotics.world import WorldError, load_world

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_CONNECT = 2


class ConnectivityError(Exception):
    pass


def _default_url() -> str:
    return os.environ.get("SDBOTICS_CONTROLLER_URL", "http://127.0.0.1:8080")


def _env_port(name: str, fallback: int) -> int:
    try:
        return int(os.environ[name])
    except (KeyError, ValueError):
        return fallback


def _http(method: str, url: str, body: dict | None = None, timeout: float = 10.0) -> tuple[int, bytes]:
    data = json.dumps(body).encode("utf-8") if body is not None else None
    req = urllib.request.Request(url, data=data, method=method,
                                 headers={"Content-Type": "application/json"})
    try:
        with urllib.request.urlopen(req, timeout=timeout) as resp:
            return resp.status, resp.read()
    except urllib.error.HTTPError as err:
        return err.code, err.read()
    except (urllib.error.URLError, OSError) as err:
        raise ConnectivityError(f"{method} {url}: {err}") from err


def _fail(message: str, code: int) -> int:
    print(f"error: {message}", file=sys.stderr)
    return code


def _error_message(raw: bytes) -> str:
    try:
        body = json.loads(raw)
        return f"{body.get('error', 'ERROR')}: {json.dumps(body.get('detail'))}"
    except ValueError:
        return raw.decode("utf-8", errors="replace") or "request failed"


# --- controller ---

def cmd_controller(args: argparse.Namespace) -> int:
    links = None
    if args.topology:
        try:
            world = load_world(args.topology)
        except (OSError, ValueError, WorldError) as exc:
            return _fail(f"topology file {args.topology}: {exc}", EXIT_ERROR)
        links = world.links or None
    controller = Controller(mode=args.mode, hub=args.hub, links=links)
    south = SouthboundServer(controller, host=args.host, port=args.bots_port)
    north = NorthboundServer(controller, host=args.host, port=args.http_port)
    south.start()
    north.start()
    print(f"controller up: mode={args.mode} bots={south.host}:{south.port} "
          f"http={north.host}:{north.port}", file=sys.stderr, flush=True)
    stop = threading.Event()
    signal.signal(signal.SIGTERM, lambda *a: stop.set())
    try:
        stop.wait()
    except KeyboardInterrupt:
        pass
    finally:
        north.stop()
        south.stop()
    return EXIT_OK


# --- sim ---

def _host_port(value: str) -> tuple[str, int]:
    host, sep, port = value.rpartition(":")
    if not sep or not port.isdigit():
        raise argparse.ArgumentTypeError(f"{value!r} is not host:port")
    return host or "127.0.0.1", int(port)


def cmd_sim(args: argparse.Namespace) -> int:
    try:
        world = load_world(args.world)
    except (OSError, ValueError, WorldError) as exc:
        return _fail(f"world file {args.world}: {exc}", EXIT_ERROR)
    host, port = args.controller
    try:
        run_fleet(world, host, port, ticks=args.ticks,
                  tick_interval=args.tick_interval, trace_path=args.trace)
    except RegistrationRefused as exc:
        return _fail(str(exc), EXIT_ERROR)
    except (ConnectionError, OSError) as exc:
        return _fail(f"controller {host}:{port}: {exc}", EXIT_CONNECT)
    print(f"sim finished after {world.tick} ticks", file=sys.stderr)
    return EXIT_OK


# --- run ---

def cmd_run(args: argparse.Namespace) -> int:
    try:
        with open(args.mission, "rb") as f:
            mission = json.load(f)
    except FileNotFoundError:
        return _fail(f"file not found: {args.mission}", EXIT_ERROR)
    except (OSError, ValueError) as exc:
        return _fail(f"mission file {args.mission}: {exc}", EXIT_ERROR)
    try:
        status, raw = _http("POST", args.controller_url + "/api/v1/programs", mission)
    except ConnectivityError as exc:
        return _fail(str(exc), EXIT_CONNECT)
    if status != 202:
        return _fail(_error_message(raw), EXIT_ERROR)
    # the report is echoed byte-for-byte as the controller returned it
    sys.stdout.buffer.write(raw + b"\n")
    sys.stdout.buffer.flush()
    return EXIT_OK


# --- queries ---

def _human_robots(body) -> list[str]:
    return [
        f"robot {r['robot_id']}: vendor={r['vendor']} "
        f"{'alive' if r['alive'] else 'dead'} last_tick={r['last_tick']} at {r['address']}"
        for r in body
    ] or ["no robots registered"]


def _human_stats(body) -> list[str]:
    lines = [
        f"mode={body['mode']} registered={body['registered']} uptime_ticks={body['uptime_ticks']}",
        f"dispatches={body['dispatches']} checksum_errors={body['checksum_errors']} "
        f"protocol_errors={body['protocol_errors']}",
    ]
    for rid, s in body["sessions"].items():
        lines.append(
            f"robot {rid}: out={s['packets_out']} in={s['packets_in']} "
            f"relayed={s['relayed']} delivered={s['delivered']} "
            f"checksum_errors={s['checksum_errors']} {'alive' if s['alive'] else 'dead'}")
    for link, count in body["links"].items():
        lines.append(f"link {link}: {count} packets")
    return lines


def _human_map(body) -> list[str]:
    return [
        f"robot {rid}: ({rec['x']},{rec['y']}) heading={rec['heading']} "
        f"holding={rec['holding']} powered={rec['powered']} tick={rec['tick']}"
        for rid, rec in body.items()
    ] or ["map empty"]


def _human_groups(body) -> list[str]:
    return [f"{name}: {', '.join(map(str, ids))}" for name, ids in body.items()] or ["no groups"]


_QUERY_VIEWS = {
    "robots": ("/api/v1/robots", _human_robots),
    "stats": ("/api/v1/stats", _human_stats),
    "map": ("/api/v1/map", _human_map),
    "groups": ("/api/v1/groups", _human_groups),
}


def cmd_query(args: argparse.Namespace) -> int:
    path, render = _QUERY_VIEWS[args.command]
    try:
        status, raw = _http("GET", args.controller_url + path)
    except ConnectivityError as exc:
        return _fail(str(exc), EXIT_CONNECT)
    if status != 200:
        return _fail(_error_message(raw), EXIT_ERROR)
    if args.json:
        sys.stdout.buffer.write(raw + b"\n")
        return EXIT_OK
    for line in render(json.loads(raw)):
        print(line, file=sys.stderr)
    return EXIT_OK


def cmd_path(args: argparse.Namespace) -> int:
    url = f"{args.controller_url}/api/v1/path?src={args.src}&dst={args.dst}"
    try:
        status, raw = _http("GET", url)
    except ConnectivityError as exc:
        return _fail(str(exc), EXIT_CONNECT)
    if status != 200:
        return _fail(_error_message(raw), EXIT_ERROR)
    if args.json:
        sys.stdout.buffer.write(raw + b"\n")
        return EXIT_OK
    body = json.loads(raw)
    cost = body["cost"]
    cost_text = str(int(cost)) if float(cost).is_integer() else str(cost)
    print(f"{' -> '.join(body['path'])} (cost {cost_text})", file=sys.stderr)
    return EXIT_OK


# --- packet ---

def cmd_packet(args: argparse.Namespace) -> int:
    try:
        with open(args.file, "rb") as f:
            buf = f.read()
    except FileNotFoundError:
        return _fail(f"file not found: {args.file}", EXIT_ERROR)
    except OSError as exc:
        return _fail(str(exc), EXIT_ERROR)
    print(hexdump(buf))
    return EXIT_OK


# --- argument wiring ---

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sdbotics",
                                     description="software-defined robot fleet tooling")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("controller", help="host the controller services")
    p.add_argument("--mode", choices=("centralized", "cloud"), default="centralized")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--bots-port", type=int,
                   default=_env_port("SDBOTICS_BOTS_PORT", DEFAULT_BOTS_PORT))
    p.add_argument("--http-port", type=int,
                   default=_env_port("SDBOTICS_HTTP_PORT", DEFAULT_HTTP_PORT))
    p.add_argument("--topology", help="world file whose links section seeds the topology")
    p.add_argument("--hub", type=int, help="hosting robot id in centralized mode")
    p.set_defaults(func=cmd_controller)

    p = sub.add_parser("sim", help="run a world file's robots")
    p.add_argument("--world", required=True)
    p.add_argument("--controller", type=_host_port, default=("127.0.0.1", DEFAULT_BOTS_PORT),
                   metavar="HOST:PORT")
    p.add_argument("--ticks", type=int, default=100)
    p.add_argument("--tick-interval", type=float, default=0.01)
    p.add_argument("--trace", help="write a JSON-lines trajectory trace here")
    p.set_defaults(func=cmd_sim)

    p = sub.add_parser("run", help="submit a mission file")
    p.add_argument("mission")
    p.add_argument("--controller-url", default=None)
    p.set_defaults(func=cmd_run)

    for name in ("robots", "stats", "map", "groups"):
        p = sub.add_parser(name, help=f"query {name}")
        p.add_argument("--json", action="store_true")
        p.add_argument("--controller-url", default=None)
        p.set_defaults(func=cmd_query)

    p = sub.add_parser("path", help="route between two topology nodes")
    p.add_argument("src")
    p.add_argument("dst")
    p.add_argument("--json", action="store_true")
    p.add_argument("--controller-url", default=None)
    p.set_defaults(func=cmd_path)

    p = sub.add_parser("packet", help="packet inspection")
    packet_sub = p.add_subparsers(dest="packet_command", required=True)
    d = packet_sub.add_parser("dump", help="annotated hexdump of a packet file")
    d.add_argument("file")
    d.set_defaults(func=cmd_packet)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    if getattr(args, "controller_url", None) is None and hasattr(args, "controller_url"):
        args.controller_url = _default_url()
    if getattr(args, "controller_url", "").endswith("/"):
        args.controller_url = args.controller_url.rstrip("/")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
