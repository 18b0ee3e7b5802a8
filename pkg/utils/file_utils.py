"""File handling utilities: text dumps of spaces, masks, covers, families and fields."""

import csv
import json
import math
from pathlib import Path
from typing import Any, Dict, Iterable, List, Sequence, Tuple

import numpy as np

from core.errors import ConfigError, SpaceError
from core.space import Ball, MetricMeasureSpace, ScalarField

REPORT_COLUMNS = ["run", "name", "observed_constant", "ceiling", "pass", "refinement_ratio", "witness"]


def _num(value: float) -> str:
    """Shortest text that reads back to the same float."""
    return repr(float(value))


def _header(path: Path, expected: str) -> Tuple[List[str], List[str]]:
    try:
        lines = path.read_text(encoding="utf-8").splitlines()
    except (IOError, OSError) as e:
        raise ConfigError(f"cannot read {path}: {e}")
    lines = [line.strip() for line in lines if line.strip() and not line.lstrip().startswith("#")]
    if not lines or not lines[0].startswith(expected):
        raise ConfigError(f"{path} is not a '{expected}' file")
    return lines[0].split(), lines[1:]


def ensure_directory_exists(directory: str) -> bool:
    """Ensure a directory exists, create if necessary."""
    try:
        Path(directory).mkdir(parents=True, exist_ok=True)
        return True
    except (PermissionError, OSError) as e:
        print(f"Error creating directory {directory}: {e}")
        return False


# ---------------------------------------------------------------------------
# Spaces and masks
# ---------------------------------------------------------------------------

def write_space(path: str, space: MetricMeasureSpace) -> None:
    """`mms v1 <n> <coords|matrix>` then point lines (and distance lines for matrices)."""
    kind = "coords" if space.is_euclidean else "matrix"
    lines = [f"mms v1 {space.n} {kind}"]
    if space.has_custom_window():
        r_min, r_max = space.scale_window
        lines.append(f"w {_num(r_min)} {_num(r_max)}")
    if space.is_euclidean:
        for i in range(space.n):
            coords = " ".join(_num(c) for c in space.coords[i])
            lines.append(f"p {i} {coords} {_num(space.weights[i])}")
    else:
        for i in range(space.n):
            lines.append(f"p {i} {_num(space.weights[i])}")
        dist = space.distances
        for i in range(space.n):
            for j in range(i + 1, space.n):
                lines.append(f"d {i} {j} {_num(dist[i, j])}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_space(path: str, logger=None) -> MetricMeasureSpace:
    head, body = _header(Path(path), "mms v1")
    if len(head) != 4 or head[3] not in ("coords", "matrix"):
        raise ConfigError(f"{path}: malformed header {' '.join(head)}")
    n = int(head[2])
    kind = head[3]
    window = None
    weights = np.full(n, np.nan)
    coords: Dict[int, List[float]] = {}
    matrix = np.zeros((n, n)) if kind == "matrix" else None
    seen_d = set()
    for line in body:
        parts = line.split()
        tag = parts[0]
        try:
            if tag == "w":
                window = (float(parts[1]), float(parts[2]))
            elif tag == "p":
                i = int(parts[1])
                if not 0 <= i < n:
                    raise SpaceError(f"invalid point id {i}")
                weights[i] = float(parts[-1])
                if kind == "coords":
                    coords[i] = [float(v) for v in parts[2:-1]]
            elif tag == "d" and matrix is not None:
                i, j, value = int(parts[1]), int(parts[2]), float(parts[3])
                matrix[i, j] = matrix[j, i] = value
                seen_d.add((min(i, j), max(i, j)))
            else:
                raise ConfigError(f"{path}: unexpected line '{line}'")
        except (ValueError, IndexError):
            raise ConfigError(f"{path}: malformed line '{line}'")
    if np.any(np.isnan(weights)):
        raise SpaceError(f"{path}: missing weight for point {int(np.flatnonzero(np.isnan(weights))[0])}")
    if kind == "coords":
        dims = {len(c) for c in coords.values()}
        if len(dims) != 1:
            raise SpaceError(f"{path}: inconsistent coordinate dimensions")
        return MetricMeasureSpace.from_coords(np.array([coords[i] for i in range(n)]), weights,
                                              scale_window=window, logger=logger)
    if len(seen_d) != n * (n - 1) // 2:
        raise SpaceError(f"{path}: expected {n * (n - 1) // 2} distance lines, found {len(seen_d)}")
    return MetricMeasureSpace.from_matrix(matrix, weights, scale_window=window, logger=logger)


def write_mask(path: str, mask: np.ndarray) -> None:
    ids = np.flatnonzero(mask)
    Path(path).write_text("mask v1\n" + "".join(f"{i}\n" for i in ids), encoding="utf-8")


def read_mask(path: str, n: int) -> np.ndarray:
    _, body = _header(Path(path), "mask v1")
    mask = np.zeros(n, dtype=bool)
    for line in body:
        i = int(line.split()[0])
        if not 0 <= i < n:
            raise SpaceError(f"{path}: invalid point id {i}")
        mask[i] = True
    return mask


# ---------------------------------------------------------------------------
# Construction artifacts
# ---------------------------------------------------------------------------

def write_cover(path: str, cover) -> None:
    lines = ["whitney v1"]
    for c, r, a in zip(cover.centers, cover.radii, cover.anchors):
        lines.append(f"b {int(c)} {_num(r)} {int(a)}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_cover_balls(path: str) -> Tuple[List[Ball], List[int]]:
    _, body = _header(Path(path), "whitney v1")
    balls, anchors = [], []
    for line in body:
        parts = line.split()
        if parts[0] != "b" or len(parts) != 4:
            raise ConfigError(f"{path}: malformed line '{line}'")
        balls.append(Ball(int(parts[1]), float(parts[2])))
        anchors.append(int(parts[3]))
    return balls, anchors


def write_family(path: str, family) -> None:
    lines = [f"quasiballs v1 epsilon={_num(family.epsilon)} delta={_num(family.delta)}"]
    for b, h in enumerate(family.sets):
        if h.size:
            lines.append(f"h {b} " + " ".join(str(int(i)) for i in h))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_family_sets(path: str) -> Tuple[float, float, Dict[int, List[int]]]:
    head, body = _header(Path(path), "quasiballs v1")
    try:
        params = dict(item.split("=", 1) for item in head[2:])
        epsilon, delta = float(params["epsilon"]), float(params["delta"])
    except (KeyError, ValueError):
        raise ConfigError(f"{path}: header needs epsilon=<e> delta=<d>")
    sets = {}
    for line in body:
        parts = line.split()
        if parts[0] != "h":
            raise ConfigError(f"{path}: malformed line '{line}'")
        sets[int(parts[1])] = [int(v) for v in parts[2:]]
    return epsilon, delta, sets


def write_partition(path: str, partition) -> None:
    coo = partition.matrix.tocoo()
    order = np.lexsort((coo.col, coo.row))
    lines = ["phi v1"]
    lines.extend(f"{int(coo.row[k])} {int(coo.col[k])} {_num(coo.data[k])}" for k in order)
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def write_field(path: str, f: ScalarField) -> None:
    lines = ["field v1"]
    lines.extend(f"{int(i)} {_num(v)}" for i, v in zip(f.domain, f.values))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_field(path: str) -> ScalarField:
    _, body = _header(Path(path), "field v1")
    ids, values = [], []
    for line in body:
        parts = line.split()
        ids.append(int(parts[0]))
        values.append(float(parts[1]))
    return ScalarField(ids, values)


# ---------------------------------------------------------------------------
# Reports
# ---------------------------------------------------------------------------

def write_json(path: str, payload: Any) -> None:
    Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def read_json(path: str) -> Any:
    try:
        return json.loads(Path(path).read_text(encoding="utf-8"))
    except (IOError, OSError) as e:
        raise ConfigError(f"cannot read {path}: {e}")
    except json.JSONDecodeError as e:
        raise ConfigError(f"{path} is not valid JSON: {e}")


def _cell(value: Any) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return _num(value) if math.isfinite(value) else ("inf" if value > 0 else "nan")
    if isinstance(value, (dict, list)):
        return json.dumps(value, sort_keys=True)
    return str(value)


def write_audit_reports(json_path: str, csv_path: str, reports: Sequence, run: str = "") -> None:
    """One JSON document with every report plus a flat CSV with one row per audit."""
    write_json(json_path, [r.to_dict() for r in reports])
    with open(csv_path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(REPORT_COLUMNS)
        for r in reports:
            writer.writerow([run, r.name, _cell(r.observed_constant), _cell(r.ceiling), str(r.passed),
                             _cell(r.refinement_ratio), _cell(r.to_dict().get("witness"))])


def read_report_rows(csv_path: str) -> List[Dict[str, str]]:
    with open(csv_path, newline="", encoding="utf-8") as handle:
        return list(csv.DictReader(handle))


def merge_report_csvs(paths: Iterable[str], out_path: str) -> int:
    """Concatenate report CSVs, tagging rows with their run when untagged; returns the row count."""
    rows = []
    for path in paths:
        run = Path(path).parent.name or Path(path).stem
        for row in read_report_rows(path):
            if not row.get("run"):
                row["run"] = run
            rows.append(row)
    with open(out_path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.DictWriter(handle, fieldnames=REPORT_COLUMNS)
        writer.writeheader()
        for row in rows:
            writer.writerow({k: row.get(k, "") for k in REPORT_COLUMNS})
    return len(rows)
