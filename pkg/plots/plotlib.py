"""Shared plumbing for the figure scripts.

The scripts are pure consumers of the simulator's CSV/JSON artifacts: they
parse the documented schemas, render, and never recompute physics.  A schema
name or version mismatch is a hard error (exit 2 from the CLIs).
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402

SUPPORTED_VERSION = 1


class SchemaError(ValueError):
    pass


def read_csv(path, expect_schema: str):
    """Rows of a simulator CSV after validating its schema tag."""
    lines = Path(path).read_text().splitlines()
    if len(lines) < 3 or not lines[0].startswith("# manifest:"):
        raise SchemaError(f"{path}: missing manifest header line")
    if not lines[1].startswith("# schema:"):
        raise SchemaError(f"{path}: missing schema header line")
    tag = lines[1].removeprefix("# schema:").strip()
    name, _, version = tag.partition(" v")
    if name != expect_schema:
        raise SchemaError(f"{path}: schema {name!r}, expected {expect_schema!r}")
    if not version.isdigit() or int(version) != SUPPORTED_VERSION:
        raise SchemaError(f"{path}: unsupported {name} version {version!r}")
    header = lines[2].split(",")
    rows = [line.split(",") for line in lines[3:] if line]
    if not rows:
        raise SchemaError(f"{path}: no data rows")
    return header, rows


def read_report(path, expect_suite: str | None = None):
    payload = json.loads(Path(path).read_text())
    if payload.get("schema_version") != SUPPORTED_VERSION:
        raise SchemaError(f"{path}: unsupported report schema_version")
    if expect_suite is not None and payload.get("suite") != expect_suite:
        raise SchemaError(f"{path}: suite {payload.get('suite')!r}, "
                          f"expected {expect_suite!r}")
    return payload


def columns(header, rows, names, cast=float):
    idx = [header.index(n) for n in names]
    return [[cast(r[i]) for r in rows] for i in idx]


def save(fig, out_base: str) -> list[str]:
    """Write the figure as both PNG and SVG next to the given base path."""
    base = Path(out_base)
    base.parent.mkdir(parents=True, exist_ok=True)
    written = []
    for ext in ("png", "svg"):
        target = base.with_suffix(f".{ext}")
        fig.savefig(target, bbox_inches="tight", dpi=150)
        written.append(str(target))
    plt.close(fig)
    return written


def run(main_fn) -> None:
    try:
        outputs = main_fn()
    except SchemaError as exc:
        print(f"schema error: {exc}", file=sys.stderr)
        sys.exit(2)
    except FileNotFoundError as exc:
        print(f"missing input: {exc}", file=sys.stderr)
        sys.exit(2)
    for out in outputs:
        print(out)
    sys.exit(0)
