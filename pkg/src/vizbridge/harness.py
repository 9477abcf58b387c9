"""Record and replay tool-call traces against the MCP server.

A trace is a scripted agent: an ordered list of tool calls, each with
optional expectations on its result. Replay goes through the real wire path
(JSON-RPC encode, serve loop, decode) so a passing trace exercises exactly
what an MCP client would.
"""

from __future__ import annotations

import io
import json
import math
import re
import tempfile
import time
from dataclasses import dataclass, field
from importlib import resources
from typing import Any, Iterator

from .engine import MockEngine
from .protocol import PROTOCOL_VERSION, McpServer, encode_request
from .registry import Session

TRACE_VERSION = 1
BUNDLED = ("iso-half", "tf-bands", "shared-session", "error-handling")
ASSERTION_KINDS = ("text_contains", "numeric", "is_error", "has_image")
DEFAULT_REL_TOL = 0.01

_FENCE = re.compile(r"```json\n(.*?)\n```", re.S)


class TraceError(Exception):
    pass


@dataclass
class TraceStep:
    tool: str | None = None
    arguments: dict[str, Any] = field(default_factory=dict)
    expect: list[dict[str, Any]] = field(default_factory=list)
    # a direct engine mutation standing in for a second (GUI) client
    gui: str | None = None

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "TraceStep":
        if not isinstance(data, dict) or ("tool" in data) == ("gui" in data):
            raise TraceError(f"step must have exactly one of 'tool' or 'gui': {data!r}")
        expect = data.get("expect", [])
        if isinstance(expect, dict):
            expect = [expect]
        for a in expect:
            if not isinstance(a, dict) or len(a) != 1 or next(iter(a)) not in ASSERTION_KINDS:
                raise TraceError(f"bad assertion {a!r}; expected one of {ASSERTION_KINDS}")
        return cls(data.get("tool"), dict(data.get("arguments", {})), list(expect), data.get("gui"))

    def to_dict(self) -> dict[str, Any]:
        d: dict[str, Any] = {"gui": self.gui} if self.gui else {"tool": self.tool}
        d["arguments"] = self.arguments
        if self.expect:
            d["expect"] = self.expect
        return d


@dataclass
class Trace:
    name: str
    steps: list[TraceStep] = field(default_factory=list)
    backend: str = "mock"
    comment: str = ""

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "Trace":
        if data.get("trace_version") != TRACE_VERSION:
            raise TraceError(f"unsupported trace_version {data.get('trace_version')!r}")
        if data.get("backend", "mock") not in ("mock", "paraview"):
            raise TraceError(f"unknown backend {data.get('backend')!r}")
        return cls(
            name=data.get("name", "unnamed"),
            steps=[TraceStep.from_dict(s) for s in data.get("steps", [])],
            backend=data.get("backend", "mock"),
            comment=data.get("comment", ""),
        )

    def to_dict(self) -> dict[str, Any]:
        d = {"trace_version": TRACE_VERSION, "name": self.name, "backend": self.backend}
        if self.comment:
            d["comment"] = self.comment
        d["steps"] = [s.to_dict() for s in self.steps]
        return d

    @classmethod
    def load(cls, path: str) -> "Trace":
        with open(path, encoding="utf-8") as fh:
            try:
                data = json.load(fh)
            except ValueError as exc:
                raise TraceError(f"{path}: not valid JSON: {exc}") from None
        return cls.from_dict(data)

    def save(self, path: str) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh, indent=2)
            fh.write("\n")


def bundled_trace(name: str) -> Trace:
    if name not in BUNDLED:
        raise TraceError(f"no bundled trace {name!r}; available: {', '.join(BUNDLED)}")
    text = resources.files("vizbridge").joinpath("traces", f"{name}.json").read_text("utf-8")
    return Trace.from_dict(json.loads(text))


@dataclass
class StepOutcome:
    index: int
    label: str
    passed: bool
    message: str = ""
    seconds: float = 0.0


@dataclass
class ReplayReport:
    name: str
    outcomes: list[StepOutcome] = field(default_factory=list)
    total_steps: int = 0

    @property
    def passed(self) -> bool:
        return len(self.outcomes) == self.total_steps and all(o.passed for o in self.outcomes)

    @property
    def failure(self) -> StepOutcome | None:
        return next((o for o in self.outcomes if not o.passed), None)

    def lines(self) -> list[str]:
        out = [
            f"step {o.index}: {o.label}: {'ok' if o.passed else 'FAIL'}"
            + (f" - {o.message}" if o.message else "")
            + f" ({o.seconds * 1000:.1f} ms)"
            for o in self.outcomes
        ]
        out.append(f"trace {self.name!r}: {'PASS' if self.passed else 'FAIL'} "
                   f"({sum(o.passed for o in self.outcomes)}/{self.total_steps} steps)")
        return out

    def to_dict(self, timings: bool = True) -> dict[str, Any]:
        steps = []
        for o in self.outcomes:
            d = {"index": o.index, "label": o.label, "passed": o.passed, "message": o.message}
            if timings:
                d["seconds"] = o.seconds
            steps.append(d)
        return {"name": self.name, "passed": self.passed, "steps": steps}


# ---------------------------------------------------------------------------
# assertions
# ---------------------------------------------------------------------------

def result_payload(result: dict[str, Any]) -> Any:
    """Structured payload of a wire-form tool result, else its fenced JSON block."""
    if "structuredContent" in result:
        return result["structuredContent"]
    for item in result.get("content", []):
        if item.get("type") == "text":
            m = _FENCE.search(item["text"])
            if m:
                return json.loads(m.group(1))
    return None


def lookup(payload: Any, path: str) -> Any:
    node = payload
    for part in path.split(".") if path else []:
        if isinstance(node, list):
            try:
                node = node[int(part)]
            except (ValueError, IndexError):
                raise KeyError(path) from None
        elif isinstance(node, dict) and part in node:
            node = node[part]
        else:
            raise KeyError(path)
    return node


def _result_text(result: dict[str, Any]) -> str:
    return "\n".join(i["text"] for i in result.get("content", []) if i.get("type") == "text")


def check(assertion: dict[str, Any], result: dict[str, Any]) -> str | None:
    """Return a diagnostic if ``assertion`` fails against a wire-form result."""
    kind, want = next(iter(assertion.items()))
    if kind == "is_error":
        got = bool(result.get("isError"))
        return None if got == bool(want) else f"expected is_error={want}, got {got}: {_result_text(result)[:200]}"
    if kind == "has_image":
        got = any(i.get("type") == "image" and i.get("mimeType") == "image/png" for i in result.get("content", []))
        return None if got == bool(want) else f"expected has_image={want}, got {got}"
    if kind == "text_contains":
        text = _result_text(result)
        return None if want in text else f"expected text containing {want!r}, got {text[:200]!r}"
    path, value = want["path"], want["value"]
    tol = want.get("rel_tol", DEFAULT_REL_TOL)
    try:
        got = lookup(result_payload(result), path)
    except KeyError:
        return f"payload has no field {path!r}"
    if isinstance(got, bool) or not isinstance(got, (int, float)):
        return f"payload field {path!r} is not numeric: {got!r}"
    if not math.isclose(got, value, rel_tol=tol, abs_tol=1e-12):
        return f"{path}: expected {value!r} (rel_tol {tol}), got {got!r}"
    return None


# ---------------------------------------------------------------------------
# replay
# ---------------------------------------------------------------------------

class _LineSink(io.TextIOBase):
    def __init__(self):
        self.lines: list[str] = []

    def write(self, s: str) -> int:
        self.lines.extend(part for part in s.split("\n") if part)
        return len(s)


_GUI_OPS = {
    "set_contour_value": lambda eng, src, a: eng.set_contour_value(src.id, a["value"]),
    "set_visibility": lambda eng, src, a: eng.set_visibility(src.id, a["visible"]),
    "delete_source": lambda eng, src, a: eng.delete_source(src.id),
}


def _gui_step(server: McpServer, step: TraceStep) -> str | None:
    op = _GUI_OPS.get(step.gui or "")
    if op is None:
        return f"unknown gui operation {step.gui!r}"
    try:
        src = server.session.resolve(step.arguments["source"])
        op(server.session.engine, src, step.arguments)
    except Exception as exc:  # noqa: BLE001 - reported as a step failure
        return f"gui {step.gui} failed: {exc}"
    return None


def replay(trace: Trace, server: McpServer | None = None) -> ReplayReport:
    """Replay ``trace`` through the server's serve loop, halting on the first failure."""
    tmp = None
    if server is None:
        if trace.backend != "mock":
            raise TraceError(f"trace {trace.name!r} needs a {trace.backend} server")
        tmp = tempfile.TemporaryDirectory(prefix="vizbridge-replay-")
        server = McpServer(Session(MockEngine(), screenshot_dir=tmp.name))
    report = ReplayReport(trace.name, total_steps=len(trace.steps))
    sink = _LineSink()

    def requests() -> Iterator[str]:
        if not server.initialized:
            yield encode_request("initialize", {"protocolVersion": PROTOCOL_VERSION,
                                                "clientInfo": {"name": "vizbridge-replay"}}, id=0)
            init = json.loads(sink.lines.pop())
            if "error" in init:
                report.outcomes.append(StepOutcome(-1, "initialize", False, init["error"]["message"]))
                return
        for i, step in enumerate(trace.steps):
            t0 = time.perf_counter()
            if step.gui:
                msg = _gui_step(server, step)
                report.outcomes.append(StepOutcome(i, f"gui:{step.gui}", msg is None, msg or "",
                                                   time.perf_counter() - t0))
                if msg:
                    return
                continue
            yield encode_request("tools/call", {"name": step.tool, "arguments": step.arguments}, id=i + 1)
            response = json.loads(sink.lines.pop())
            elapsed = time.perf_counter() - t0
            if response.get("id") != i + 1 or "result" not in response:
                report.outcomes.append(StepOutcome(i, step.tool, False, f"protocol failure: {response}", elapsed))
                return
            problems = [p for p in (check(a, response["result"]) for a in step.expect) if p]
            if step.tool not in server.session.registry and {"is_error": True} not in step.expect:
                problems.insert(0, f"unknown tool {step.tool!r}")
            report.outcomes.append(StepOutcome(i, step.tool, not problems, "; ".join(problems), elapsed))
            if problems:
                return

    try:
        server.run_serve_loop(requests(), sink)
    finally:
        if tmp is not None:
            tmp.cleanup()
    return report


# ---------------------------------------------------------------------------
# recording
# ---------------------------------------------------------------------------

def _numeric_leaves(node: Any, prefix: str = "") -> Iterator[tuple[str, float]]:
    if isinstance(node, bool):
        return
    if isinstance(node, (int, float)):
        yield prefix, node
    elif isinstance(node, dict):
        for k, v in node.items():
            yield from _numeric_leaves(v, f"{prefix}.{k}" if prefix else str(k))
    elif isinstance(node, list):
        for i, v in enumerate(node):
            yield from _numeric_leaves(v, f"{prefix}.{i}" if prefix else str(i))


def step_from_log_entry(entry: dict[str, Any], rel_tol: float = DEFAULT_REL_TOL) -> TraceStep:
    digest = entry.get("digest") or {}
    expect: list[dict[str, Any]] = [{"is_error": bool(entry["is_error"])}]
    if digest.get("has_image"):
        expect.append({"has_image": True})
    if not entry["is_error"]:
        for path, value in _numeric_leaves(digest.get("payload")):
            expect.append({"numeric": {"path": path, "value": value, "rel_tol": rel_tol}})
    args = entry.get("arguments")
    return TraceStep(entry["tool"], args if isinstance(args, dict) else {}, expect)


def record(session_log: str | list[dict[str, Any]], name: str = "recorded") -> Trace:
    """Turn a JSON-lines session log (path or parsed entries) into a replayable trace."""
    if isinstance(session_log, list):
        return Trace(name, [step_from_log_entry(e) for e in session_log])
    steps = []
    with open(session_log, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                entry = json.loads(line)
                steps.append(step_from_log_entry(entry))
            except (ValueError, KeyError, TypeError, AttributeError) as exc:
                raise TraceError(f"{session_log}:{lineno}: malformed session log entry: {exc}") from None
    return Trace(name, steps)
