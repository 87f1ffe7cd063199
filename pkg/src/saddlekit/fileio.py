"""Text formats: problem files, point files, and key-value reports.

All files are line-oriented UTF-8 text.  Blank lines and lines starting
with `#` are ignored everywhere.  Every float is written with `%.17g`,
which round-trips IEEE doubles exactly.

Problem files (header line `saddlekit-problem v1`)::

    saddlekit-problem v1
    name: intro-qp            # optional
    n: 2
    m: 4
    objective.c: 0 -1         # dense, exactly n numbers
    objective.Q: 1 1 0.995    # coordinate triplet "i j value", 1-based,
    objective.Q: 1 2 -0.069   # repeated per nonzero entry; omit for LPs
    constraints[1].kind: affine
    constraints[1].a: 1 1     # coordinate pair "i value", repeated
    constraints[1].a: 2 2
    constraints[1].b: 1
    constraints[2].kind: quadratic
    constraints[2].c: 1 0.5
    constraints[2].Q: 1 1 2
    constraints[2].b: 0.25

Indices are 1-based as in Matrix Market files.  Unlisted coordinates are
zero; listing the same coordinate twice is an error.  Matrices must come
out symmetric (both triangles are written; at read time symmetry is
enforced by problem validation).

Point files (`saddlekit-point v1`) carry two dense lines `x:` and `y:`.

Reports and run summaries reuse the same `key: value` line grammar with
their own header lines; their text portions are `#` comments so the whole
file stays machine-readable.
"""

from __future__ import annotations

import numpy as np

from .problem import AffineConstraint, PrimalDualPoint, ProblemSpec, QuadraticConstraint

__all__ = [
    "FileFormatError",
    "fmt",
    "fmt_vec",
    "write_problem",
    "read_problem",
    "dumps_problem",
    "parse_problem",
    "write_point",
    "read_point",
    "write_kv_report",
    "read_kv",
    "render_value",
]

PROBLEM_HEADER = "saddlekit-problem v1"
POINT_HEADER = "saddlekit-point v1"


class FileFormatError(ValueError):
    """Malformed input file; the message names the offending line."""


def fmt(v):
    """One float, full round-trip precision."""
    return "%.17g" % float(v)


def fmt_vec(v):
    return " ".join(fmt(x) for x in np.asarray(v, dtype=float))


def _parse_float(tok, lineno):
    try:
        v = float(tok)
    except ValueError:
        raise FileFormatError(f"line {lineno}: not a number: {tok!r}") from None
    if not np.isfinite(v):
        raise FileFormatError(f"line {lineno}: non-finite number: {tok!r}")
    return v


def _parse_index(tok, upper, lineno):
    try:
        i = int(tok)
    except ValueError:
        raise FileFormatError(f"line {lineno}: not an index: {tok!r}") from None
    if not 1 <= i <= upper:
        raise FileFormatError(f"line {lineno}: index {i} outside 1..{upper}")
    return i - 1


def _parse_count(tok, lineno):
    try:
        v = int(tok)
    except ValueError:
        raise FileFormatError(f"line {lineno}: not a count: {tok!r}") from None
    if v < 1:
        raise FileFormatError(f"line {lineno}: count must be positive, got {v}")
    return v


def _kv_lines(text, header, where="input"):
    """Yield (lineno, key, value) for every content line, checking the header."""
    seen_header = False
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if not seen_header:
            if line != header:
                raise FileFormatError(
                    f"{where} line {lineno}: expected header {header!r}, got {line!r}"
                )
            seen_header = True
            continue
        if ":" not in line:
            raise FileFormatError(f"line {lineno}: expected 'key: value', got {line!r}")
        key, _, value = line.partition(":")
        yield lineno, key.strip(), value.strip()
    if not seen_header:
        raise FileFormatError(f"{where}: empty document, expected header {header!r}")


def dumps_problem(p):
    """Serialize a ProblemSpec to the v1 text format."""
    lines = [PROBLEM_HEADER]
    if p.name:
        lines.append(f"name: {p.name}")
    lines.append(f"n: {p.n}")
    lines.append(f"m: {p.m}")
    lines.append(f"objective.c: {fmt_vec(p.c)}")
    if p.Q is not None and np.any(p.Q):
        for i in range(p.n):
            for j in range(p.n):
                if p.Q[i, j] != 0.0:
                    lines.append(f"objective.Q: {i + 1} {j + 1} {fmt(p.Q[i, j])}")
    for k, con in enumerate(p.constraints, start=1):
        if isinstance(con, AffineConstraint):
            lines.append(f"constraints[{k}].kind: affine")
            for i, v in enumerate(con.a):
                if v != 0.0:
                    lines.append(f"constraints[{k}].a: {i + 1} {fmt(v)}")
        else:
            lines.append(f"constraints[{k}].kind: quadratic")
            for i, v in enumerate(con.c):
                if v != 0.0:
                    lines.append(f"constraints[{k}].c: {i + 1} {fmt(v)}")
            for i in range(p.n):
                for j in range(p.n):
                    if con.Q[i, j] != 0.0:
                        lines.append(f"constraints[{k}].Q: {i + 1} {j + 1} {fmt(con.Q[i, j])}")
        lines.append(f"constraints[{k}].b: {fmt(con.b)}")
    return "\n".join(lines) + "\n"


def write_problem(p, path):
    with open(path, "w") as fh:
        fh.write(dumps_problem(p))


def _set_once(arr, idx, value, lineno):
    if arr[idx] != 0.0:
        raise FileFormatError(f"line {lineno}: duplicate coordinate entry")
    arr[idx] = value


def parse_problem(text, where="problem file"):
    """Parse the v1 problem grammar; see the module docstring."""
    name = ""
    n = m = None
    c = None
    Q = None
    cons_fields = {}  # 1-based index -> dict of collected pieces

    def require_dims(lineno):
        if n is None or m is None:
            raise FileFormatError(f"line {lineno}: n and m must be declared first")

    for lineno, key, value in _kv_lines(text, PROBLEM_HEADER, where):
        if key == "name":
            name = value
        elif key == "n":
            n = _parse_count(value, lineno)
        elif key == "m":
            m = _parse_count(value, lineno)
        elif key == "objective.c":
            require_dims(lineno)
            toks = value.split()
            if len(toks) != n:
                raise FileFormatError(f"line {lineno}: objective.c needs {n} numbers")
            c = np.array([_parse_float(t, lineno) for t in toks])
        elif key == "objective.Q":
            require_dims(lineno)
            toks = value.split()
            if len(toks) != 3:
                raise FileFormatError(f"line {lineno}: expected 'i j value' triplet")
            if Q is None:
                Q = np.zeros((n, n))
            i = _parse_index(toks[0], n, lineno)
            j = _parse_index(toks[1], n, lineno)
            _set_once(Q, (i, j), _parse_float(toks[2], lineno), lineno)
        elif key.startswith("constraints["):
            require_dims(lineno)
            head, _, field = key.partition("].")
            if not field:
                raise FileFormatError(f"line {lineno}: malformed constraint key {key!r}")
            k = _parse_index(head[len("constraints["):], m, lineno)
            slot = cons_fields.setdefault(k, {"lineno": lineno})
            if field == "kind":
                if value not in ("affine", "quadratic"):
                    raise FileFormatError(f"line {lineno}: unknown kind {value!r}")
                slot["kind"] = value
            elif field in ("a", "c"):
                toks = value.split()
                if len(toks) != 2:
                    raise FileFormatError(f"line {lineno}: expected 'i value' pair")
                vec = slot.setdefault(field, np.zeros(n))
                i = _parse_index(toks[0], n, lineno)
                _set_once(vec, i, _parse_float(toks[1], lineno), lineno)
            elif field == "Q":
                toks = value.split()
                if len(toks) != 3:
                    raise FileFormatError(f"line {lineno}: expected 'i j value' triplet")
                mat = slot.setdefault("Q", np.zeros((n, n)))
                i = _parse_index(toks[0], n, lineno)
                j = _parse_index(toks[1], n, lineno)
                _set_once(mat, (i, j), _parse_float(toks[2], lineno), lineno)
            elif field == "b":
                slot["b"] = _parse_float(value, lineno)
            else:
                raise FileFormatError(f"line {lineno}: unknown constraint field {field!r}")
        else:
            raise FileFormatError(f"line {lineno}: unknown key {key!r}")

    if n is None or m is None or c is None:
        raise FileFormatError(f"{where}: missing one of n, m, objective.c")
    constraints = []
    for k in range(m):
        slot = cons_fields.get(k)
        if slot is None:
            raise FileFormatError(f"{where}: constraint {k + 1} never declared")
        lineno = slot["lineno"]
        kind = slot.get("kind")
        if kind is None:
            raise FileFormatError(f"line {lineno}: constraint {k + 1} has no kind")
        if "b" not in slot:
            raise FileFormatError(f"line {lineno}: constraint {k + 1} has no b")
        if kind == "affine":
            if "c" in slot or "Q" in slot:
                raise FileFormatError(f"line {lineno}: affine constraint with quadratic fields")
            constraints.append(AffineConstraint(slot.get("a", np.zeros(n)), slot["b"]))
        else:
            if "a" in slot:
                raise FileFormatError(f"line {lineno}: quadratic constraint with field 'a'")
            constraints.append(
                QuadraticConstraint(
                    slot.get("c", np.zeros(n)), slot.get("Q", np.zeros((n, n))), slot["b"]
                )
            )
    return ProblemSpec(c=c, Q=Q, constraints=tuple(constraints), name=name)


def read_problem(path):
    with open(path) as fh:
        return parse_problem(fh.read(), where=str(path))


def write_point(z, path):
    with open(path, "w") as fh:
        fh.write(f"{POINT_HEADER}\nx: {fmt_vec(z.x)}\ny: {fmt_vec(z.y)}\n")


def read_point(path):
    with open(path) as fh:
        text = fh.read()
    x = y = None
    for lineno, key, value in _kv_lines(text, POINT_HEADER, str(path)):
        if key == "x":
            x = np.array([_parse_float(t, lineno) for t in value.split()])
        elif key == "y":
            y = np.array([_parse_float(t, lineno) for t in value.split()])
        else:
            raise FileFormatError(f"line {lineno}: unknown key {key!r}")
    if x is None or y is None:
        raise FileFormatError(f"{path}: point file needs both x and y lines")
    return PrimalDualPoint(x, y)


def render_value(v):
    """Report-value rendering: floats via fmt, bools as true/false,
    iterables as [a, b, ...], None as none."""
    if v is None:
        return "none"
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return fmt(v)
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (list, tuple, np.ndarray)):
        return "[" + ", ".join(render_value(x) for x in v) + "]"
    return str(v)


def write_kv_report(path, header, comment_lines, pairs):
    """Write a report: header line, '#' text section, then key-value lines."""
    out = [header]
    out.extend("# " + t if t else "#" for t in comment_lines)
    out.extend(f"{k}: {render_value(v)}" for k, v in pairs)
    with open(path, "w") as fh:
        fh.write("\n".join(out) + "\n")


def read_kv(path, header):
    """Read any key-value file back as an ordered list of (key, value) strings."""
    with open(path) as fh:
        text = fh.read()
    return [(k, v) for _, k, v in _kv_lines(text, header, str(path))]
