"""Readers for the solver's text artifacts.

Three file kinds exist, all plain text with 17-significant-digit
numbers: the trace CSV (fixed column header, one row per recorded
iteration), its `.summary` sidecar (`saddlekit-summary v1` header then
`key: value` lines), and analysis or moduli reports
(`saddlekit-analysis v1` header, `#` comment lines, `key: value`
lines).  Everything here parses those formats from their documented
shape alone; this package never imports the solver library, so the
files are the entire interface.
"""

import csv
import os

import numpy as np

TRACE_HEADER = "iter,kkt,step_norm_P,aux_gap_P,dist2_ref,distP_ref,num_dual_pos,num_primal_tight"
SUMMARY_HEADER = "saddlekit-summary v1"
ANALYSIS_HEADER = "saddlekit-analysis v1"


class PlotDataError(ValueError):
    """An input file is not in the documented format."""


def summary_path_for(trace_path):
    return os.path.splitext(str(trace_path))[0] + ".summary"


def read_trace(path):
    """Trace CSV as a dict of numpy arrays keyed by column name.

    Every row must have exactly as many fields as the header declares.
    """
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise PlotDataError(f"{path}: empty trace file")
        if ",".join(header) != TRACE_HEADER:
            raise PlotDataError(f"{path}: unexpected trace header {','.join(header)!r}")
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if len(row) != len(header):
                raise PlotDataError(
                    f"{path} line {lineno}: {len(row)} fields, header has {len(header)}"
                )
            try:
                rows.append([float(v) for v in row])
            except ValueError:
                raise PlotDataError(f"{path} line {lineno}: non-numeric field")
    if not rows:
        raise PlotDataError(f"{path}: no recorded iterations")
    data = np.array(rows)
    return {name: data[:, i] for i, name in enumerate(header)}


def _read_kv(path, expect_header):
    with open(path) as fh:
        lines = fh.read().splitlines()
    if not lines or lines[0] != expect_header:
        raise PlotDataError(f"{path}: expected header {expect_header!r}")
    out = {}
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        key, sep, value = line.partition(":")
        if not sep:
            raise PlotDataError(f"{path} line {lineno}: expected 'key: value'")
        out[key.strip()] = value.strip()
    return out


def read_summary(path):
    return _read_kv(path, SUMMARY_HEADER)


def read_report(path):
    return _read_kv(path, ANALYSIS_HEADER)


def marker_iteration(report):
    """The identification iteration recorded in a report, or None.

    Reports write `k_star: none` when the final iterate never settled
    into a stable activity pattern.
    """
    value = report.get("k_star", "none")
    if value == "none":
        return None
    try:
        return int(value)
    except ValueError:
        raise PlotDataError(f"unreadable k_star value {value!r}")
