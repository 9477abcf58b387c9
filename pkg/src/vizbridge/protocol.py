"""MCP server over newline-delimited JSON-RPC 2.0 on standard streams.

Messages are handled strictly one at a time in arrival order. Protocol error
codes are reserved for malformed traffic; anything that goes wrong inside a
tool comes back as a normal ``tools/call`` result with ``isError`` set.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from typing import Any, Iterable, TextIO

from . import __version__
from .registry import Session

log = logging.getLogger(__name__)

SERVER_NAME = "vizbridge-mcp"
PROTOCOL_VERSION = "2025-06-18"

PARSE_ERROR = -32700
INVALID_REQUEST = -32600
METHOD_NOT_FOUND = -32601
INVALID_PARAMS = -32602
INTERNAL_ERROR = -32603
NOT_INITIALIZED = -32002


class RpcError(Exception):
    def __init__(self, code: int, message: str, data: Any = None, id: Any = None):
        super().__init__(message)
        self.code = code
        self.message = message
        self.data = data
        self.id = id

    def to_response(self) -> dict[str, Any]:
        err: dict[str, Any] = {"code": self.code, "message": self.message}
        if self.data is not None:
            err["data"] = self.data
        return {"jsonrpc": "2.0", "id": self.id, "error": err}


@dataclass
class RpcRequest:
    method: str
    params: Any = field(default_factory=dict)
    id: Any = None

    @property
    def is_notification(self) -> bool:
        return self.id is None


def _reject_constant(name: str):
    raise ValueError(f"{name} is not valid JSON")


def _parse_int(text: str):
    # avoid the int-from-string digit limit on absurdly long literals
    return int(text) if len(text) < 400 else float(text)


def decode_message(line: str | bytes) -> RpcRequest:
    """Parse one line into a request, raising ``RpcError`` for bad traffic."""
    try:
        if isinstance(line, bytes):
            line = line.decode("utf-8")
        msg = json.loads(line, parse_constant=_reject_constant, parse_int=_parse_int)
    except (ValueError, RecursionError) as exc:
        raise RpcError(PARSE_ERROR, "Parse error", str(exc)) from None
    if not isinstance(msg, dict):
        raise RpcError(INVALID_REQUEST, "Invalid Request: expected a JSON object")
    mid = msg.get("id")
    if isinstance(mid, bool) or not (mid is None or isinstance(mid, (int, float, str))):
        raise RpcError(INVALID_REQUEST, "Invalid Request: id must be a number, string or null")
    if msg.get("jsonrpc") != "2.0":
        raise RpcError(INVALID_REQUEST, 'Invalid Request: jsonrpc must be "2.0"', id=mid)
    method = msg.get("method")
    if not isinstance(method, str):
        raise RpcError(INVALID_REQUEST, "Invalid Request: missing method", id=mid)
    params = msg.get("params", {})
    if params is None:
        params = {}
    return RpcRequest(method, params, mid)


def encode_message(msg: dict[str, Any]) -> str:
    return json.dumps(msg, ensure_ascii=False, separators=(",", ":"), allow_nan=False)


def encode_request(method: str, params: Any = None, id: Any = None) -> str:
    msg: dict[str, Any] = {"jsonrpc": "2.0", "method": method}
    if id is not None:
        msg["id"] = id
    if params is not None:
        msg["params"] = params
    return encode_message(msg)


class McpServer:
    def __init__(self, session: Session):
        self.session = session
        self.initialized = False

    # -- handlers ------------------------------------------------------
    def handle_initialize(self, params: Any) -> dict[str, Any]:
        if self.initialized:
            raise RpcError(INVALID_REQUEST, "session already initialized")
        version = params.get("protocolVersion") if isinstance(params, dict) else None
        if version != PROTOCOL_VERSION:
            raise RpcError(
                INVALID_PARAMS,
                f"unsupported protocol version {version!r}",
                {"supported": [PROTOCOL_VERSION]},
            )
        self.initialized = True
        return {
            "protocolVersion": PROTOCOL_VERSION,
            "capabilities": {"tools": {"listChanged": False}},
            "serverInfo": {"name": SERVER_NAME, "version": __version__},
        }

    def handle_tools_list(self) -> dict[str, Any]:
        return {"tools": [d.to_wire() for d in self.session.registry.describe_tools()]}

    def handle_tools_call(self, params: Any) -> dict[str, Any]:
        if not isinstance(params, dict):
            result = self.session.call_tool(None, {})
            return result.to_wire()
        return self.session.call_tool(params.get("name"), params.get("arguments", {})).to_wire()

    def dispatch(self, req: RpcRequest) -> dict[str, Any] | None:
        method = req.method
        if method == "initialize":
            return self.handle_initialize(req.params)
        if method == "ping":
            return {}
        if method.startswith("notifications/"):
            return None
        if not self.initialized:
            raise RpcError(NOT_INITIALIZED, "server not initialized")
        if method == "tools/list":
            return self.handle_tools_list()
        if method == "tools/call":
            return self.handle_tools_call(req.params)
        raise RpcError(METHOD_NOT_FOUND, f"Method not found: {method}")

    def handle_line(self, line: str | bytes) -> str | None:
        """Process one line; return the response line, or None for notifications."""
        try:
            req = decode_message(line)
        except RpcError as exc:
            return encode_message(exc.to_response())
        try:
            result = self.dispatch(req)
        except RpcError as exc:
            exc.id = req.id
            response = exc.to_response()
        except Exception as exc:  # noqa: BLE001 - keep the loop alive
            log.exception("failure handling %s", req.method)
            response = RpcError(INTERNAL_ERROR, f"Internal error: {exc}", id=req.id).to_response()
        else:
            response = {"jsonrpc": "2.0", "id": req.id, "result": result if result is not None else {}}
        if req.is_notification:
            return None
        return encode_message(response)

    def run_serve_loop(self, instream: Iterable[str | bytes], outstream: TextIO) -> None:
        """Serve until the input is exhausted, one response line per request."""
        for line in instream:
            if isinstance(line, bytes):
                line = line.decode("utf-8", errors="replace")
            if not line.strip():
                continue
            out = self.handle_line(line)
            if out is not None:
                outstream.write(out + "\n")
                outstream.flush()
        log.info("input closed; shutting down")
