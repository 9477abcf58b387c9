"""Command line entry point: ``vizbridge serve | replay | record | demo``.

Exit codes: 0 success, 1 assertion or convergence failure, 2 usage or
configuration error. Under ``serve`` stdout carries protocol traffic only.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from dataclasses import dataclass, fields
from typing import Any, Sequence

from . import __version__
from .controllers import (
    AreaGoal,
    BandColorGoal,
    ControllerError,
    refine_transfer_function,
    solve_iso_area,
)
from .engine import EngineError, FieldSpec, MockEngine, make_engine
from .harness import BUNDLED, TraceError, Trace, bundled_trace, record, replay
from .protocol import McpServer
from .registry import Session

ENV_PREFIX = "VIZBRIDGE_"
BACKENDS = ("mock", "paraview")
DEMOS = ("iso-half", "tf-bands")

log = logging.getLogger("vizbridge")


class ConfigError(Exception):
    pass


@dataclass
class ServerConfig:
    backend: str = "mock"
    pvserver_url: str | None = None
    screenshot_dir: str = "./screenshots"
    log_path: str | None = None
    mock_dataset: str | None = None

    def validate(self) -> None:
        if self.backend not in BACKENDS:
            raise ConfigError(f"unknown backend {self.backend!r}; expected one of {BACKENDS}")
        if self.backend == "paraview" and not self.pvserver_url:
            raise ConfigError("--backend paraview requires --pvserver-url host:port")


def load_config(args: argparse.Namespace, environ: dict[str, str] | None = None) -> ServerConfig:
    """Merge defaults < config file < environment < flags."""
    environ = os.environ if environ is None else environ
    values: dict[str, Any] = {}
    names = [f.name for f in fields(ServerConfig)]
    config_path = getattr(args, "config", None) or environ.get(ENV_PREFIX + "CONFIG")
    if config_path:
        try:
            with open(config_path, encoding="utf-8") as fh:
                data = json.load(fh)
        except (OSError, ValueError) as exc:
            raise ConfigError(f"cannot read config file {config_path}: {exc}") from None
        if not isinstance(data, dict):
            raise ConfigError(f"config file {config_path} must hold a JSON object")
        unknown = set(data) - set(names)
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        values.update(data)
    for name in names:
        env = environ.get(ENV_PREFIX + name.upper())
        if env:
            values[name] = env
    for name in names:
        flag = getattr(args, name, None)
        if flag is not None:
            values[name] = flag
    cfg = ServerConfig(**values)
    cfg.validate()
    return cfg


def _setup_logging(cfg: ServerConfig) -> None:
    handler: logging.Handler
    if cfg.log_path:
        handler = logging.FileHandler(cfg.log_path, encoding="utf-8")
    else:
        handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(logging.Formatter("%(asctime)s %(levelname)s %(name)s: %(message)s"))
    root = logging.getLogger()
    root.handlers[:] = [handler]
    root.setLevel(logging.INFO)


def build_session(cfg: ServerConfig) -> Session:
    engine = make_engine(cfg.backend, cfg.pvserver_url)
    session = Session(engine, screenshot_dir=cfg.screenshot_dir)
    if cfg.mock_dataset:
        if cfg.backend != "mock":
            raise ConfigError("mock_dataset only applies to the mock backend")
        src = engine.load_dataset(cfg.mock_dataset)
        session.active_source_id = src.id
    return session


def cmd_serve(args: argparse.Namespace) -> int:
    cfg = load_config(args)
    _setup_logging(cfg)
    session = build_session(cfg)
    server = McpServer(session)
    log.info("serving on stdio with the %s backend", cfg.backend)
    try:
        server.run_serve_loop(sys.stdin, sys.stdout)
    except KeyboardInterrupt:
        log.info("interrupted")
    return 0


def _load_trace(ref: str) -> Trace:
    if os.path.isfile(ref):
        return Trace.load(ref)
    if ref in BUNDLED:
        return bundled_trace(ref)
    raise ConfigError(f"no such trace file: {ref}")


def cmd_replay(args: argparse.Namespace) -> int:
    trace = _load_trace(args.trace)
    if trace.backend == "mock":
        report = replay(trace)
    else:
        cfg = load_config(args)
        report = replay(trace, McpServer(build_session(cfg)))
    for line in report.lines():
        print(line)
    return 0 if report.passed else 1


def cmd_record(args: argparse.Namespace) -> int:
    try:
        trace = record(args.session_log, name=args.name)
    except OSError as exc:
        raise ConfigError(str(exc)) from None
    if args.output:
        trace.save(args.output)
    else:
        print(json.dumps(trace.to_dict(), indent=2))
    return 0


def demo_session(screenshot_dir: str) -> Session:
    return Session(MockEngine(), screenshot_dir=screenshot_dir)


def run_iso_half(session: Session, reference_value: float = 0.4, fraction: float = 0.5) -> dict[str, Any]:
    """Contour a radial field and search for the isovalue with ``fraction`` of the area."""
    session.call_tool("load_data", {"dataset": FieldSpec("radial").to_dict()})
    created = session.call_tool("create_isosurface", {"value": reference_value})
    if created.is_error:
        raise ControllerError(created.text_content())
    goal = AreaGoal(created.payload["source"]["id"], created.payload["area"], fraction)
    value, trace = solve_iso_area(goal, session)
    return {"goal": "iso-half", "isovalue": value, "trace": trace.to_dict()}


def run_tf_bands(session: Session) -> dict[str, Any]:
    """Color the low band brown and the high band green on a radial volume."""
    session.call_tool("load_data", {"dataset": FieldSpec("radial").to_dict()})
    session.call_tool("toggle_volume_rendering")
    goal = BandColorGoal([(0.0, 0.3, (0.55, 0.27, 0.07)), (0.5, 0.87, (0.0, 0.8, 0.0))])
    tf, trace = refine_transfer_function(goal, session)
    return {"goal": "tf-bands", "transfer_function": tf, "trace": trace.to_dict()}


def cmd_demo(args: argparse.Namespace) -> int:
    cfg = load_config(args)
    if cfg.backend != "mock":
        raise ConfigError("demos run on the mock backend")
    _setup_logging(cfg)
    os.makedirs(cfg.screenshot_dir, exist_ok=True)
    session = demo_session(cfg.screenshot_dir)
    out = run_iso_half(session) if args.goal == "iso-half" else run_tf_bands(session)
    print(json.dumps(out, indent=2))
    return 0 if out["trace"]["converged"] else 1


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--backend", choices=BACKENDS, default=None)
    p.add_argument("--pvserver-url", dest="pvserver_url", default=None, metavar="HOST:PORT")
    p.add_argument("--screenshot-dir", dest="screenshot_dir", default=None)
    p.add_argument("--log", dest="log_path", default=None, help="log file (default: stderr)")
    p.add_argument("--config", default=None, help="JSON config file mirroring the server options")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="vizbridge", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("serve", help="run the MCP server on stdin/stdout")
    _common(p)
    p.add_argument("--mock-dataset", dest="mock_dataset", default=None, help="field spec JSON to preload")
    p.set_defaults(func=cmd_serve)

    p = sub.add_parser("replay", help="replay a trace file or bundled trace")
    p.add_argument("trace", help=f"trace path or one of: {', '.join(BUNDLED)}")
    _common(p)
    p.set_defaults(func=cmd_replay)

    p = sub.add_parser("record", help="convert a session log into a trace")
    p.add_argument("session_log")
    p.add_argument("-o", "--output", default=None)
    p.add_argument("--name", default="recorded")
    p.set_defaults(func=cmd_record)

    p = sub.add_parser("demo", help="run a goal controller end to end and print its trace")
    p.add_argument("goal", choices=DEMOS)
    _common(p)
    p.set_defaults(func=cmd_demo)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, TraceError, EngineError, ValueError) as exc:
        print(f"vizbridge: error: {exc}", file=sys.stderr)
        return 2
    except ControllerError as exc:
        print(f"vizbridge: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
