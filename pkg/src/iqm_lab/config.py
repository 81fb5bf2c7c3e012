"""Run configurations: JSON documents checked against the shipped schema."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from importlib import resources
from typing import Any

from jsonschema import Draft202012Validator

from .errors import MissingSeed, SchemaError
from .worlds import WorldSpec

COMMANDS = ("statistics", "tree", "bell", "scan", "interference")


def load_schema(name: str = "run_config.schema.json") -> dict:
    return json.loads(resources.files("iqm_lab").joinpath("schemas", name).read_text(encoding="utf-8"))


_validator = Draft202012Validator(load_schema())


@dataclass(frozen=True)
class RunConfig:
    seed: int
    world: WorldSpec
    world_id: str | None
    command: str
    block: dict[str, Any]
    generation: dict[str, Any] | None = None
    output_dir: str | None = None
    formats: tuple[str, ...] = ("json", "csv")
    raw: dict[str, Any] = field(default_factory=dict, compare=False)


def _error_path(err) -> str:
    parts = [str(p) for p in err.absolute_path]
    if err.validator == "additionalProperties" and isinstance(err.instance, dict):
        allowed = set(err.schema.get("properties", {}))
        extra = sorted(k for k in err.instance if k not in allowed)
        if extra:
            parts.append(extra[0])
    elif err.validator == "required":
        missing = [k for k in err.validator_value if k not in err.instance]
        if missing:
            parts.append(missing[0])
    return ".".join(parts) or "<root>"


def parse_config(text: str) -> RunConfig:
    """Parse and validate a configuration; unknown keys are rejected."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        raise SchemaError("<root>", f"not valid JSON: {e}") from None
    if not isinstance(doc, dict):
        raise SchemaError("<root>", "a configuration is a JSON object")
    if "seed" not in doc:
        raise MissingSeed("seed is mandatory; runs are never seeded from the clock")
    errors = sorted(_validator.iter_errors(doc), key=lambda e: (list(map(str, e.absolute_path)), e.message))
    if errors:
        err = errors[0]
        raise SchemaError(_error_path(err), err.message)
    blocks = [c for c in COMMANDS if c in doc]
    if len(blocks) != 1:
        raise SchemaError("<root>", f"exactly one command block of {list(COMMANDS)} is required, found {blocks}")
    command = blocks[0]
    block = doc[command]
    if command == "scan":
        grid = block["vi_grid"]
        if any(b <= a for a, b in zip(grid, grid[1:])):
            raise SchemaError("scan.vi_grid", "must be sorted in strictly increasing order")
    if command == "bell":
        n = len(block.get("angles_deg", ()))
        want = 3 if block.get("inequality") == "bell1964" else 4
        if "angles_deg" in block and n != want:
            raise SchemaError("bell.angles_deg", f"{block.get('inequality', 'chsh')} needs {want} angles, got {n}")
    w = doc["world"]
    out = doc.get("output", {})
    return RunConfig(
        seed=int(doc["seed"]),
        world=WorldSpec.make(w["kind"], **w.get("params", {})),
        world_id=w.get("id"),
        command=command,
        block=block,
        generation=doc.get("generation"),
        output_dir=out.get("dir"),
        formats=tuple(out.get("formats", ("json", "csv"))),
        raw=doc,
    )
