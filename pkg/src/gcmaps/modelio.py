"""Text format for VOU models.

::

    # comment
    [model]
    n = 2
    [A]
    -1 1
    0 -1
    [Sigma]
    1 0
    0 1

``[model]`` is optional (``n`` is then taken from the row count). Numbers
are written with ``repr`` so a dump re-parses to bit-identical matrices.
"""

from __future__ import annotations

import numpy as np

from .errors import ParseError, SemanticError
from .vougc import VouModel


def parse_model(text: str) -> VouModel:
    sections = {}
    current = None
    n = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        body = raw.split("#", 1)[0].strip()
        if not body:
            continue
        if body.startswith("["):
            if not body.endswith("]"):
                raise ParseError("malformed section header", lineno, 1, expected=("]",))
            current = body[1:-1].strip()
            if current not in ("model", "A", "Sigma"):
                raise ParseError(f"unknown section [{current}]", lineno, 1, expected=("[model]", "[A]", "[Sigma]"))
            if current in sections:
                raise ParseError(f"duplicate section [{current}]", lineno, 1)
            sections[current] = []
            continue
        if current is None:
            raise ParseError("content before first section header", lineno, 1, expected=("[A]",))
        if current == "model":
            key, _, val = body.partition("=")
            if key.strip() != "n" or not val.strip():
                raise ParseError("expected 'n = <int>'", lineno, 1)
            try:
                n = int(val)
            except ValueError:
                raise ParseError("n must be an integer", lineno, body.index("=") + 2) from None
            continue
        try:
            row = [float(x) for x in body.split()]
        except ValueError:
            raise ParseError("matrix rows must hold numbers", lineno, 1, expected=("number",)) from None
        sections[current].append((lineno, row))

    for name in ("A", "Sigma"):
        if not sections.get(name):
            raise ParseError(f"missing [{name}] section")
    if n is None:
        n = len(sections["A"])
    mats = {}
    for name in ("A", "Sigma"):
        rows = sections[name]
        if len(rows) != n:
            raise SemanticError(f"[{name}] has {len(rows)} rows, expected {n}", rows[-1][0], 1)
        for lineno, row in rows:
            if len(row) != n:
                raise SemanticError(f"[{name}] row has {len(row)} entries, expected {n}", lineno, 1)
        mats[name] = np.array([r for _, r in rows])
    return VouModel(mats["A"], mats["Sigma"])


def format_model(model: VouModel) -> str:
    lines = ["[model]", f"n = {model.n}", "[A]"]
    lines += [" ".join(repr(float(v)) for v in row) for row in model.A]
    lines.append("[Sigma]")
    lines += [" ".join(repr(float(v)) for v in row) for row in model.Sigma]
    return "\n".join(lines) + "\n"
