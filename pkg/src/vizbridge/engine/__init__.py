from .base import (
    ApplicabilityError,
    Engine,
    EngineError,
    PipelineSource,
    RenderCapture,
    TransferFunction,
    TransferFunctionError,
)
from .mock import FieldSpec, MockEngine


def make_engine(backend: str = "mock", pvserver_url: str | None = None) -> Engine:
    if backend == "mock":
        return MockEngine()
    if backend == "paraview":
        if not pvserver_url:
            raise ValueError("the paraview backend requires a pvserver url (host:port)")
        from .paraview import ParaViewEngine

        return ParaViewEngine(pvserver_url)
    raise ValueError(f"unknown backend {backend!r}")


__all__ = [
    "ApplicabilityError",
    "Engine",
    "EngineError",
    "FieldSpec",
    "MockEngine",
    "PipelineSource",
    "RenderCapture",
    "TransferFunction",
    "TransferFunctionError",
    "make_engine",
]
