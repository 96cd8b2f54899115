"""Feature matrices: ROI histograms, CSV ingestion, and a planted-block generator."""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigError, ContractError, DataError


@dataclass
class FeatureMatrix:
    values: np.ndarray
    labels: np.ndarray | None = None
    subject_ids: list[str] | None = None
    planted_edges: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.ndim != 2:
            raise DataError(f"features must be 2-D, got shape {self.values.shape}")
        if not np.all(np.isfinite(self.values)):
            raise DataError("features contain NaN or Inf")
        if self.labels is not None:
            self.labels = validate_labels(self.labels, self.n)
        if self.subject_ids is not None and len(self.subject_ids) != self.n:
            raise DataError(f"{len(self.subject_ids)} subject ids for {self.n} rows")

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def d(self) -> int:
        return self.values.shape[1]

    @property
    def n_classes(self) -> int:
        return 0 if self.labels is None else int(self.labels.max()) + 1


def validate_labels(labels, n: int) -> np.ndarray:
    labels = np.asarray(labels)
    if labels.shape != (n,):
        raise DataError(f"expected {n} labels, got {labels.shape[0] if labels.ndim else 0}")
    if not np.issubdtype(labels.dtype, np.integer):
        if not np.all(np.mod(labels, 1) == 0):
            raise DataError("labels must be integers")
    labels = labels.astype(np.int64)
    if labels.min() < 0:
        raise DataError("labels must be non-negative class ids")
    counts = np.bincount(labels)
    if np.any(counts == 0):
        missing = np.flatnonzero(counts == 0).tolist()
        raise DataError(f"class ids must be contiguous from 0; empty classes {missing}")
    return labels


# ---------------------------------------------------------------- ROI histograms

@dataclass
class RoiVoxelDump:
    """Per subject, per ROI, the voxel values in [0, 1]."""
    subject_ids: list[str]
    rois: list[int]
    values: list[list[np.ndarray]]

    @property
    def p(self) -> int:
        return len(self.rois)


def roi_histogram_features(dump: RoiVoxelDump, q: int) -> FeatureMatrix:
    if q < 1:
        raise ConfigError(f"bin count must be >= 1, got {q}")
    out = np.zeros((len(dump.subject_ids), dump.p * q))
    for s, (sid, per_roi) in enumerate(zip(dump.subject_ids, dump.values)):
        if len(per_roi) != dump.p:
            raise DataError(f"subject {sid}: {len(per_roi)} ROIs, expected {dump.p}")
        for r, v in enumerate(per_roi):
            v = np.asarray(v, dtype=np.float64)
            if v.size == 0:
                raise DataError(f"subject {sid}: ROI {dump.rois[r]} has no voxels")
            if np.any((v < 0) | (v > 1)) or not np.all(np.isfinite(v)):
                raise DataError(f"subject {sid}: ROI {dump.rois[r]} has values outside [0, 1]")
            # 1.0 belongs to the last bin
            bins = np.minimum(np.floor(v * q).astype(np.int64), q - 1)
            out[s, r * q:(r + 1) * q] = np.bincount(bins, minlength=q) / v.size
    return FeatureMatrix(out, subject_ids=list(dump.subject_ids))


def load_roi_dump(directory) -> RoiVoxelDump:
    """Read one ``roi_index<TAB>value`` file per subject (sorted by file name)."""
    directory = Path(directory)
    files = sorted(p for p in directory.iterdir() if p.is_file() and not p.name.startswith("."))
    if not files:
        raise DataError(f"{directory}: no subject files")
    per_subject: list[dict[int, list[float]]] = []
    for path in files:
        rois: dict[int, list[float]] = {}
        for lineno, line in enumerate(path.read_text().splitlines(), start=1):
            if not line.strip() or line.startswith("#"):
                continue
            parts = line.split("\t")
            try:
                if len(parts) != 2:
                    raise ValueError
                roi, val = int(parts[0]), float(parts[1])
            except ValueError:
                raise DataError(f"{path}:{lineno}: expected roi_index<TAB>value, got {line!r}") from None
            if not 0.0 <= val <= 1.0:
                raise DataError(f"{path}:{lineno}: value {val} outside [0, 1]")
            rois.setdefault(roi, []).append(val)
        per_subject.append(rois)
    all_rois = sorted(set().union(*per_subject))
    values = []
    for path, rois in zip(files, per_subject):
        row = []
        for r in all_rois:
            if r not in rois:
                raise DataError(f"subject {path.stem}: ROI {r} has no voxels")
            row.append(np.array(rois[r]))
        values.append(row)
    return RoiVoxelDump([p.stem for p in files], all_rois, values)


# ---------------------------------------------------------------- CSV ingestion

def _is_number(tok: str) -> bool:
    try:
        float(tok)
    except ValueError:
        return False
    return True


def load_features(path, labels_path=None) -> FeatureMatrix:
    """Comma-separated features; a non-numeric first row is a header.

    A leading ``subject_id`` header column (or a first column that is
    non-numeric in every row) is read as subject ids.
    """
    path = Path(path)
    try:
        rows = list(csv.reader(io.StringIO(path.read_text())))
    except OSError as exc:
        raise DataError(f"{path}: {exc.strerror}") from None
    rows = [(i, r) for i, r in enumerate(rows, start=1) if r and any(c.strip() for c in r)]
    if not rows:
        raise DataError(f"{path}: empty feature file")
    header = None
    if not all(_is_number(c) for c in rows[0][1]):
        header = [c.strip() for c in rows[0][1]]
        rows = rows[1:]
    if not rows:
        raise DataError(f"{path}: header only, no data rows")
    id_col = header is not None and header[0].lower() in ("subject_id", "id", "subject")
    if header is None:
        id_col = all(not _is_number(r[0]) for _, r in rows) and all(
            all(_is_number(c) for c in r[1:]) for _, r in rows)
    width = len(rows[0][1])
    ids, data = [], []
    for lineno, row in rows:
        if len(row) != width:
            raise DataError(f"{path}:{lineno}: expected {width} columns, found {len(row)}")
        cells = row[1:] if id_col else row
        if id_col:
            ids.append(row[0].strip())
        vals = []
        for col, cell in enumerate(cells, start=2 if id_col else 1):
            try:
                vals.append(float(cell))
            except ValueError:
                raise DataError(f"{path}:{lineno}: column {col}: non-numeric value {cell.strip()!r}") from None
        data.append(vals)
    X = np.array(data, dtype=np.float64)
    if not np.all(np.isfinite(X)):
        bad = np.argwhere(~np.isfinite(X))[0]
        raise DataError(f"{path}: non-finite value at data row {bad[0] + 1}, column {bad[1] + 1}")
    labels = None
    if labels_path is not None:
        labels = load_labels(labels_path, ids if id_col else None, X.shape[0])
    return FeatureMatrix(X, labels=labels, subject_ids=ids if id_col else None)


def load_labels(path, subject_ids: list[str] | None, n: int) -> np.ndarray:
    """One integer per line, or ``subject_id,label`` lines joined on id."""
    path = Path(path)
    try:
        lines = path.read_text().splitlines()
    except OSError as exc:
        raise DataError(f"{path}: {exc.strerror}") from None
    by_row, by_id = [], {}
    for lineno, line in enumerate(lines, start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        parts = [p.strip() for p in line.replace("\t", ",").split(",")]
        try:
            if len(parts) == 1:
                by_row.append(int(parts[0]))
            elif len(parts) == 2:
                by_id[parts[0]] = int(parts[1])
            else:
                raise ValueError
        except ValueError:
            raise DataError(f"{path}:{lineno}: expected an integer label, got {line!r}") from None
    if by_id:
        if by_row:
            raise DataError(f"{path}: mixes plain and id-keyed label lines")
        if subject_ids is None:
            raise DataError(f"{path}: id-keyed labels but the feature file has no subject ids")
        missing = [s for s in subject_ids if s not in by_id]
        if missing:
            raise DataError(f"{path}: no label for subject {missing[0]!r}")
        by_row = [by_id[s] for s in subject_ids]
    if len(by_row) != n:
        raise DataError(f"{path}: {len(by_row)} labels for {n} feature rows")
    return validate_labels(np.array(by_row, dtype=np.int64), n)


def save_features(fm: FeatureMatrix, path) -> None:
    d = fm.d
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        head = [f"f{j}" for j in range(d)]
        if fm.subject_ids is not None:
            head = ["subject_id"] + head
        w.writerow(head)
        for i in range(fm.n):
            row = [repr(float(v)) for v in fm.values[i]]
            if fm.subject_ids is not None:
                row = [fm.subject_ids[i]] + row
            w.writerow(row)


def save_labels(labels, path) -> None:
    Path(path).write_text("".join(f"{int(v)}\n" for v in labels))


# ---------------------------------------------------------------- synthetic SBM

def gen_sbm(n: int, K: int, p_in: float, p_out: float, feature_dim: int, noise_sigma: float,
            seed: int, centroid_scale: float = 1.0) -> tuple[FeatureMatrix, np.ndarray]:
    """Planted-block cohort.

    Node features are ``centroid_scale * e_k + N(0, noise_sigma²)`` with
    orthogonal block centroids ``e_k``.  ``p_in``/``p_out`` draw a planted
    edge list (``FeatureMatrix.planted_edges``) as a structural reference.
    """
    if K < 2:
        raise ContractError(f"K must be >= 2, got {K}")
    if n < 2 * K:
        raise ContractError(f"n must be >= 2K ({2 * K}), got {n}")
    if not 0.0 <= p_out < p_in <= 1.0:
        raise ContractError(f"need 0 <= p_out < p_in <= 1, got p_in={p_in}, p_out={p_out}")
    if feature_dim < K:
        raise ContractError(f"feature_dim must be >= K for orthogonal centroids, got {feature_dim}")
    if noise_sigma < 0:
        raise ContractError("noise_sigma must be non-negative")
    rng = np.random.default_rng(seed)
    sizes = [n // K + (k < n % K) for k in range(K)]
    labels = np.repeat(np.arange(K), sizes)
    centroids = np.zeros((K, feature_dim))
    centroids[np.arange(K), np.arange(K)] = centroid_scale
    X = centroids[labels] + noise_sigma * rng.standard_normal((n, feature_dim))
    iu, ju = np.triu_indices(n, k=1)
    prob = np.where(labels[iu] == labels[ju], p_in, p_out)
    hit = rng.random(iu.size) < prob
    planted = np.stack([iu[hit], ju[hit]], axis=1)
    fm = FeatureMatrix(X, labels=labels, planted_edges=planted)
    return fm, labels
