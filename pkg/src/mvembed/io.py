"""
Text file formats.

    #mvembed-matrix v1 rows=<n> cols=<d> format=<dense|triplet>
    #mvembed-mask v1 rows=<n> views=<V>
    #mvembed-embedding v1 rows=<n> dims=<k> solver=<name> seed=<s>

Dense bodies hold one tab-separated row per line; triplet bodies hold
``row<TAB>col<TAB>value`` lines with 0-based indices; mask bodies hold one
line of V space-separated 0/1 flags per example.  Floats are written with 17
significant digits so that reading back is exact.
"""

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.sparse as sp

VERSION = "v1"


class FormatError(ValueError):
    """Malformed file; carries the path and 1-based line number."""

    def __init__(self, path, line, message):
        self.path, self.line = str(path), line
        super().__init__(f"{path}:{line}: {message}")


def fmt(x: float) -> str:
    return "%.17g" % x


def _parse_header(path, line, kind, keys):
    parts = line.split()
    if not parts or parts[0] != f"#mvembed-{kind}":
        raise FormatError(path, 1, f"expected a #mvembed-{kind} header")
    if len(parts) < 2 or parts[1] != VERSION:
        got = parts[1] if len(parts) > 1 else "none"
        raise FormatError(path, 1, f"unsupported version {got!r} (expected {VERSION})")
    fields = {}
    for item in parts[2:]:
        key, sep, value = item.partition("=")
        if not sep:
            raise FormatError(path, 1, f"bad header field {item!r}")
        fields[key] = value
    missing = [k for k in keys if k not in fields]
    if missing:
        raise FormatError(path, 1, f"header lacks {', '.join(missing)}")
    return fields


def _count(path, fields, key):
    try:
        value = int(fields[key])
    except ValueError:
        raise FormatError(path, 1, f"{key} must be an integer") from None
    if value < 0:
        raise FormatError(path, 1, f"{key} must be >= 0")
    return value


def _float(path, lineno, text):
    try:
        value = float(text)
    except ValueError:
        raise FormatError(path, lineno, f"not a number: {text!r}") from None
    if not math.isfinite(value):
        raise FormatError(path, lineno, f"non-finite value {text!r}")
    return value


def _read_lines(path):
    with open(path, encoding="utf-8") as fh:
        lines = fh.read().split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    if not lines:
        raise FormatError(path, 1, "empty file")
    return lines


def _dense_body(path, lines, rows, cols):
    body = lines[1:]
    if len(body) != rows:
        raise FormatError(path, len(lines), f"expected {rows} data rows, found {len(body)}")
    out = np.zeros((rows, cols))
    for r, line in enumerate(body):
        lineno = r + 2
        cells = line.split("\t") if cols else ([] if line == "" else line.split("\t"))
        if len(cells) != cols:
            raise FormatError(path, lineno, f"expected {cols} columns, found {len(cells)}")
        out[r] = [_float(path, lineno, c) for c in cells]
    return out


def _dense_lines(M):
    return ["\t".join(fmt(v) for v in row) for row in M]


def write_matrix(path, M, format=None):
    """Write a dense array or sparse matrix; sparse defaults to triplet format."""
    if format is None:
        format = "triplet" if sp.issparse(M) else "dense"
    rows, cols = M.shape
    header = f"#mvembed-matrix {VERSION} rows={rows} cols={cols} format={format}"
    if format == "dense":
        D = M.toarray() if sp.issparse(M) else np.asarray(M, dtype=np.float64)
        lines = _dense_lines(D)
    elif format == "triplet":
        C = sp.coo_matrix(M)
        C.sum_duplicates()
        order = np.lexsort((C.col, C.row))
        lines = [f"{C.row[t]}\t{C.col[t]}\t{fmt(C.data[t])}" for t in order if C.data[t] != 0]
    else:
        raise ValueError(f"unknown matrix format {format!r}")
    _write(path, header, lines)


def read_matrix(path):
    """Dense files give an ndarray, triplet files a CSR matrix."""
    lines = _read_lines(path)
    fields = _parse_header(path, lines[0], "matrix", ("rows", "cols", "format"))
    rows, cols = _count(path, fields, "rows"), _count(path, fields, "cols")
    if fields["format"] == "dense":
        return _dense_body(path, lines, rows, cols)
    if fields["format"] != "triplet":
        raise FormatError(path, 1, f"unknown format {fields['format']!r}")
    r_idx, c_idx, vals, seen = [], [], [], set()
    for lineno, line in enumerate(lines[1:], start=2):
        cells = line.split("\t")
        if len(cells) != 3:
            raise FormatError(path, lineno, "triplet lines need row, col, value")
        try:
            r, c = int(cells[0]), int(cells[1])
        except ValueError:
            raise FormatError(path, lineno, "row and col must be integers") from None
        if not (0 <= r < rows and 0 <= c < cols):
            raise FormatError(path, lineno, f"index ({r}, {c}) out of range")
        if (r, c) in seen:
            raise FormatError(path, lineno, f"duplicate entry ({r}, {c})")
        v = _float(path, lineno, cells[2])
        if v == 0:
            raise FormatError(path, lineno, "triplet values must be nonzero")
        seen.add((r, c))
        r_idx.append(r)
        c_idx.append(c)
        vals.append(v)
    return sp.csr_matrix((vals, (r_idx, c_idx)), shape=(rows, cols), dtype=np.float64)


def write_masks(path, masks):
    masks = [np.asarray(m, dtype=bool) for m in masks]
    n = len(masks[0]) if masks else 0
    header = f"#mvembed-mask {VERSION} rows={n} views={len(masks)}"
    stacked = np.column_stack(masks).astype(int) if masks else np.zeros((0, 0), int)
    _write(path, header, [" ".join(str(v) for v in row) for row in stacked])


def read_masks(path):
    """List of per-view boolean presence vectors."""
    lines = _read_lines(path)
    fields = _parse_header(path, lines[0], "mask", ("rows", "views"))
    rows, views = _count(path, fields, "rows"), _count(path, fields, "views")
    body = lines[1:]
    if len(body) != rows:
        raise FormatError(path, len(lines), f"expected {rows} mask rows, found {len(body)}")
    out = np.zeros((rows, views), dtype=bool)
    for r, line in enumerate(body):
        flags = line.split(" ")
        if len(flags) != views or any(f not in ("0", "1") for f in flags):
            raise FormatError(path, r + 2, f"expected {views} flags in {{0,1}}")
        out[r] = [f == "1" for f in flags]
    return [out[:, i].copy() for i in range(views)]


@dataclass
class Embedding:
    values: np.ndarray
    solver: str
    seed: str


def write_embedding(path, E, solver, seed):
    E = np.asarray(E, dtype=np.float64)
    seed = "none" if seed is None else str(seed)
    header = (f"#mvembed-embedding {VERSION} rows={E.shape[0]} dims={E.shape[1]} "
              f"solver={solver} seed={seed}")
    _write(path, header, _dense_lines(E))


def read_embedding(path) -> Embedding:
    lines = _read_lines(path)
    fields = _parse_header(path, lines[0], "embedding", ("rows", "dims", "solver", "seed"))
    values = _dense_body(path, lines, _count(path, fields, "rows"), _count(path, fields, "dims"))
    return Embedding(values, fields["solver"], fields["seed"])


def _write(path, header, lines):
    Path(path).write_text("\n".join([header] + lines) + "\n", encoding="utf-8")


def read_tasks(path, n_rows):
    """Ranking tasks: ``target<TAB>exemplar ids<TAB>relevant ids`` per line.

    Ids are comma-separated embedding row indices; every row that is not an
    exemplar is a candidate.  Lines starting with ``#`` are skipped.  Raises
    FormatError naming every unknown id.
    """
    from .eval import RankingTask

    tasks, bad = [], []
    all_rows = np.arange(n_rows)
    for lineno, line in enumerate(_read_lines(path), start=1):
        if not line.strip() or line.startswith("#"):
            continue
        cells = line.split("\t")
        if len(cells) != 3:
            raise FormatError(path, lineno, "expected target, exemplar ids, relevant ids")
        target = cells[0]
        n_bad = len(bad)
        ids = []
        for field_text in cells[1:]:
            parsed = []
            for tok in filter(None, field_text.split(",")):
                try:
                    v = int(tok)
                except ValueError:
                    v = -1
                if not 0 <= v < n_rows:
                    bad.append(f"{target}:{tok}")
                    continue
                parsed.append(v)
            ids.append(np.unique(np.asarray(parsed, dtype=int)))
        if len(bad) > n_bad:
            continue  # reported together below
        exemplars, relevant = ids
        if len(exemplars) == 0:
            raise FormatError(path, lineno, f"target {target!r} has no exemplars")
        relevant = np.setdiff1d(relevant, exemplars)
        if len(relevant) == 0:
            raise FormatError(path, lineno, f"target {target!r} has an empty relevant set")
        candidates = np.setdiff1d(all_rows, exemplars)
        tasks.append((target, exemplars, candidates, np.isin(candidates, relevant)))
    if bad:
        raise FormatError(path, 0, "unknown ids: " + " ".join(bad))
    return [RankingTask(*t) for t in tasks]


def write_tasks(path, tasks):
    lines = ["#target\texemplars\trelevant"]
    for t in tasks:
        lines.append(f"{t.target}\t{','.join(map(str, t.exemplars))}\t"
                     f"{','.join(map(str, t.relevant_ids))}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def write_report_table(path, report):
    """One row per target plus a ``macro`` row, tab separated."""
    header = "# precision@k always divides by k, even when fewer than k candidates exist"
    lines = [header, "\t".join(["target"] + report.columns())]
    for t, name in enumerate(report.targets):
        lines.append("\t".join([name] + [fmt(v) for v in report.row(t)]))
    lines.append("\t".join(["macro"] + [fmt(v) for v in report.macro_row()]))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def write_curve(path, xs, ys, names=("k", "value")):
    lines = ["\t".join(names)] + [f"{fmt(x)}\t{fmt(y)}" for x, y in zip(xs, ys)]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")
