"""CSV file formats: observed entries and dense matrices.

Observed-entries files hold one `s,t,value` line per entry with 1-based
indices; an optional `s,t,value` header and `#` comment lines are accepted.
Dense matrix files hold one row per line; missing entries in
evaluation-only files are written as the literal `NA`.
"""

from __future__ import annotations

import numpy as np


class CsvFormatError(ValueError):
    def __init__(self, path, line_no, message):
        self.path = path
        self.line_no = line_no
        super().__init__(f"{path}:{line_no}: {message}")


def read_entries_csv(path) -> tuple[list[tuple[int, int, float]], int]:
    """Parse observed entries; returns (0-based (s, t, value) triples, max index seen).

    The second element is the largest 1-based index encountered, a lower
    bound for nhat when the caller does not know it.
    """
    entries: list[tuple[int, int, float]] = []
    max_idx = 0
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            parts = [p.strip() for p in line.split(",")]
            if line_no == 1 and parts[:3] == ["s", "t", "value"]:
                continue
            if len(parts) != 3:
                raise CsvFormatError(path, line_no,
                                     f"expected 's,t,value', got {line!r}")
            try:
                s, t = int(parts[0]), int(parts[1])
                v = float(parts[2])
            except ValueError:
                raise CsvFormatError(path, line_no,
                                     f"could not parse {line!r}") from None
            if s < 1 or t < 1:
                raise CsvFormatError(path, line_no, "indices are 1-based")
            max_idx = max(max_idx, s, t)
            entries.append((s - 1, t - 1, v))
    if not entries:
        raise CsvFormatError(path, 0, "no observed entries found")
    return entries, max_idx


def write_entries_csv(path, entries, header: bool = True) -> None:
    """Write 0-based (s, t, value) triples as 1-based CSV lines."""
    with open(path, "w", encoding="utf-8") as fh:
        if header:
            fh.write("s,t,value\n")
        for s, t, v in entries:
            fh.write(f"{s + 1},{t + 1},{v!r}\n")


def read_dense_csv(path) -> np.ndarray:
    """Dense matrix, one row per line; `NA` entries become NaN."""
    rows = []
    width = None
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            parts = [p.strip() for p in line.split(",")]
            try:
                row = [float("nan") if p == "NA" else float(p) for p in parts]
            except ValueError:
                raise CsvFormatError(path, line_no,
                                     f"could not parse row {line!r}") from None
            if width is None:
                width = len(row)
            elif len(row) != width:
                raise CsvFormatError(
                    path, line_no,
                    f"row has {len(row)} columns, expected {width}")
            rows.append(row)
    if not rows:
        raise CsvFormatError(path, 0, "empty matrix file")
    return np.array(rows, dtype=float)


def write_dense_csv(path, M: np.ndarray) -> None:
    M = np.asarray(M)
    with open(path, "w", encoding="utf-8") as fh:
        for row in M:
            fh.write(",".join("NA" if np.isnan(v) else repr(float(v)) for v in row))
            fh.write("\n")
