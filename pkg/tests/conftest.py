import json

import pytest

from vizbridge.engine import MockEngine
from vizbridge.protocol import PROTOCOL_VERSION, McpServer
from vizbridge.registry import Session

RADIAL = {"family": "radial"}
LINEAR = {"family": "linear_x"}


@pytest.fixture
def engine():
    return MockEngine()


@pytest.fixture
def session(tmp_path):
    return Session(MockEngine(), screenshot_dir=str(tmp_path / "shots"))


@pytest.fixture
def server(session):
    return McpServer(session)


@pytest.fixture
def ready_server(server):
    server.handle_line(json.dumps({
        "jsonrpc": "2.0", "id": 0, "method": "initialize",
        "params": {"protocolVersion": PROTOCOL_VERSION, "clientInfo": {"name": "pytest"}},
    }))
    return server


def rpc(server, method, params=None, id=1):
    msg = {"jsonrpc": "2.0", "id": id, "method": method}
    if params is not None:
        msg["params"] = params
    out = server.handle_line(json.dumps(msg))
    return None if out is None else json.loads(out)


_acceptance_lines = []


def report_acceptance(line):
    _acceptance_lines.append(line)


def pytest_terminal_summary(terminalreporter):
    if _acceptance_lines:
        terminalreporter.section("acceptance criteria")
        for line in _acceptance_lines:
            terminalreporter.write_line(line)
