"""Figure rendering for simulation results (CSV tables + JSON manifests)."""

from .render import (
    FigureSpec,
    KIND_COMMANDS,
    REQUIRED_COLUMNS,
    SchemaError,
    fmt,
    load_manifest,
    load_table,
    render,
)

__all__ = [
    "FigureSpec",
    "KIND_COMMANDS",
    "REQUIRED_COLUMNS",
    "SchemaError",
    "fmt",
    "load_manifest",
    "load_table",
    "render",
]
