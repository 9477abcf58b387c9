"""MCP server giving language-model agents control of a visualization pipeline."""

__version__ = "0.1.0"
