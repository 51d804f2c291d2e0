"""Snapshot files: a one-line JSON header plus the nodal values.

Binary format stores the row-major float64 buffer verbatim (bit-exact
round-trip); the CSV format writes one node per line as coordinates plus the
value with 17 significant digits, which also round-trips float64 exactly.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .grid import BoxDomain, GridFunction

__all__ = ["write_snapshot", "read_snapshot"]

_MAGIC = "logflow-snapshot"


def _header(u: GridFunction, t, tau, fmt: str) -> dict:
    return {
        "format": fmt,
        "kind": _MAGIC,
        "n": u.domain.n,
        "L": u.domain.half_width,
        "m": u.domain.m,
        "margin": u.domain.margin,
        "t": None if t is None else float(t),
        "tau": None if tau is None else float(tau),
        "label": u.label,
    }


def write_snapshot(path, u: GridFunction, t=None, tau=None, fmt: str = "binary") -> Path:
    path = Path(path)
    head = _header(u, t, tau, fmt)
    if fmt == "binary":
        with open(path, "wb") as f:
            f.write(json.dumps(head, sort_keys=True).encode("utf-8"))
            f.write(b"\n")
            f.write(np.ascontiguousarray(u.values, dtype="<f8").tobytes())
    elif fmt == "csv":
        pts = u.domain.points()
        with open(path, "w", encoding="utf-8") as f:
            f.write("# " + json.dumps(head, sort_keys=True) + "\n")
            cols = ",".join(f"x{i + 1}" for i in range(u.domain.n))
            f.write(f"{cols},value\n")
            flat = u.values.ravel()
            for row, v in zip(pts, flat):
                coords = ",".join(f"{c:.17g}" for c in row)
                f.write(f"{coords},{v:.17g}\n")
    else:
        raise ValueError(f"unknown snapshot format {fmt!r}")
    return path


def read_snapshot(path) -> tuple[GridFunction, dict]:
    """Returns the grid function and the parsed header (with t / tau entries)."""
    path = Path(path)
    with open(path, "rb") as f:
        first = f.readline()
        rest = f.read()
    text = first.decode("utf-8").strip()
    if text.startswith("# "):
        text = text[2:]
    head = json.loads(text)
    if head.get("kind") != _MAGIC:
        raise ValueError(f"{path} is not a snapshot file")
    domain = BoxDomain(n=int(head["n"]), half_width=float(head["L"]), m=int(head["m"]),
                       margin=int(head.get("margin", 2)))
    if head["format"] == "binary":
        values = np.frombuffer(rest, dtype="<f8").astype(np.float64).reshape(domain.shape)
    else:
        body = rest.decode("utf-8").splitlines()
        rows = [line for line in body if line and not line.startswith(("#", "x1"))]
        values = np.array([float(r.rsplit(",", 1)[1]) for r in rows]).reshape(domain.shape)
    u = GridFunction(domain, values, label=head.get("label", ""))
    return u, head
