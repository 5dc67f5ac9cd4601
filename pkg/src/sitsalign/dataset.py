"""Dataset containers, label CSVs, prompt tables, and manifest loading.

A dataset on disk is a key=value manifest pointing at container files and
CSVs:

    cubes=<path>            N x T x C x H x W reflectance
    months=<path>           N x T calendar months (1..12, stored as floats)
    ground=<path>           N x 4 x D directional ground embeddings
    sites=<path>            optional CSV of site ids in row order
    labels.<taxonomy>=<path> CSV "site_id,<taxonomy>"
    scenicness=<path>       optional CSV "site_id,score", score in [1,10]

Relative paths are resolved against the manifest's directory.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .container import read_tensor, write_tensor
from .errors import (
    CountMismatchError,
    DataError,
    NonFiniteError,
    UnknownSiteError,
)

PATCH_SIZES = (1, 5, 9)


@dataclass
class SpectralTemporalCube:
    """One site's satellite input: T timesteps x C bands x H x W pixels."""

    site_id: str
    months: np.ndarray  # int array of length T, values in 0..12 (0 = aggregate)
    values: np.ndarray  # float array [T, C, H, W]

    @property
    def n_steps(self) -> int:
        return int(self.values.shape[0])

    def validate(self) -> "SpectralTemporalCube":
        t, c, h, w = self.values.shape
        if not 1 <= t <= 12:
            raise DataError(f"{self.site_id}: T={t} outside 1..12")
        if c < 1:
            raise DataError(f"{self.site_id}: C must be >= 1")
        if h != w or h not in PATCH_SIZES:
            raise DataError(f"{self.site_id}: H=W must be one of {PATCH_SIZES}")
        if len(self.months) != t:
            raise DataError(f"{self.site_id}: months length != T")
        if np.any(np.diff(self.months) <= 0):
            raise DataError(f"{self.site_id}: months not strictly increasing")
        if np.any((self.months < 1) | (self.months > 12)):
            raise DataError(f"{self.site_id}: months outside 1..12")
        if not np.all(np.isfinite(self.values)):
            raise NonFiniteError(f"{self.site_id}: non-finite cube values")
        return self


@dataclass
class GroundEmbeddingSet:
    """Four directional ground-image embeddings for one site."""

    site_id: str
    vectors: np.ndarray  # [4, D], order north, east, south, west

    @property
    def width(self) -> int:
        return int(self.vectors.shape[1])

    def validate(self) -> "GroundEmbeddingSet":
        if self.vectors.shape[0] != 4:
            raise DataError(f"{self.site_id}: expected 4 directional embeddings")
        if not np.all(np.isfinite(self.vectors)):
            raise NonFiniteError(f"{self.site_id}: non-finite ground embedding")
        return self


@dataclass
class PromptEmbeddingTable:
    """Per-class prompt embeddings, optionally value-tagged (scenicness)."""

    taxonomy: str
    classes: list[str]
    vectors: np.ndarray  # [n_classes, P, D]
    values: np.ndarray | None = None  # [n_classes], rating units when present

    def validate(self) -> "PromptEmbeddingTable":
        n, p, _ = self.vectors.shape
        if n != len(self.classes):
            raise DataError("prompt table: class list and vector rows disagree")
        if p < 1:
            raise DataError("prompt table: need at least one prompt per class")
        if not np.all(np.isfinite(self.vectors)):
            raise NonFiniteError("prompt table: non-finite vectors")
        if self.values is not None and len(self.values) != n:
            raise DataError("prompt table: values length != class count")
        return self


@dataclass
class LabeledDataset:
    """Aligned cubes, ground sets, and per-taxonomy labels."""

    cubes: list[SpectralTemporalCube]
    grounds: list[GroundEmbeddingSet]
    labels: dict[str, dict[str, str]] = field(default_factory=dict)
    scenicness: dict[str, float] = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.cubes)

    @property
    def site_ids(self) -> list[str]:
        return [c.site_id for c in self.cubes]

    def labels_in_order(self, taxonomy: str) -> list[str]:
        table = self.labels[taxonomy]
        return [table[sid] for sid in self.site_ids]

    def validate(self) -> "LabeledDataset":
        if len(self.cubes) != len(self.grounds):
            raise CountMismatchError(
                f"{len(self.cubes)} cubes vs {len(self.grounds)} ground sets"
            )
        for cube, ground in zip(self.cubes, self.grounds):
            if cube.site_id != ground.site_id:
                raise DataError(
                    f"site order mismatch: {cube.site_id} vs {ground.site_id}"
                )
            cube.validate()
            ground.validate()
        widths = {g.width for g in self.grounds}
        if len(widths) > 1:
            raise DataError(f"inconsistent ground widths {sorted(widths)}")
        known = set(self.site_ids)
        for taxonomy, table in self.labels.items():
            for sid in table:
                if sid not in known:
                    raise UnknownSiteError(f"labels.{taxonomy}: unknown site {sid}")
        for sid, score in self.scenicness.items():
            if sid not in known:
                raise UnknownSiteError(f"scenicness: unknown site {sid}")
            if not 1.0 <= score <= 10.0:
                raise DataError(f"scenicness score {score} outside [1,10]")
        return self


def read_label_csv(path, taxonomy: str) -> dict[str, str]:
    with open(path, newline="", encoding="utf-8") as f:
        reader = csv.reader(f)
        header = next(reader, None)
        if header is None or len(header) != 2 or header[0] != "site_id":
            raise DataError(f"{path}: expected header 'site_id,{taxonomy}'")
        return {row[0]: row[1] for row in reader if row}


def write_label_csv(path, taxonomy: str, table: dict[str, str]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f)
        writer.writerow(["site_id", taxonomy])
        for sid, label in table.items():
            writer.writerow([sid, label])


def read_scenicness_csv(path) -> dict[str, float]:
    with open(path, newline="", encoding="utf-8") as f:
        reader = csv.reader(f)
        header = next(reader, None)
        if header != ["site_id", "score"]:
            raise DataError(f"{path}: expected header 'site_id,score'")
        return {row[0]: float(row[1]) for row in reader if row}


def write_scenicness_csv(path, scores: dict[str, float]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f)
        writer.writerow(["site_id", "score"])
        for sid, score in scores.items():
            writer.writerow([sid, f"{score:.6f}"])


def read_manifest(path) -> dict[str, str]:
    """Parse a key=value manifest; blank lines and # comments are skipped."""
    entries: dict[str, str] = {}
    for lineno, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise DataError(f"{path}:{lineno}: expected key=value, got {line!r}")
        key, value = line.split("=", 1)
        entries[key.strip()] = value.strip()
    return entries


def write_manifest(path, entries: dict[str, str]) -> None:
    lines = [f"{k}={v}" for k, v in entries.items()]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


_MANIFEST_KEYS = {"cubes", "months", "ground", "sites", "scenicness"}


def load_dataset(manifest_path) -> LabeledDataset:
    """Load and validate the dataset a manifest describes."""
    manifest_path = Path(manifest_path)
    entries = read_manifest(manifest_path)
    base = manifest_path.parent
    for key in entries:
        if key not in _MANIFEST_KEYS and not key.startswith("labels."):
            raise DataError(f"{manifest_path}: unknown manifest key {key!r}")
    for key in ("cubes", "months", "ground"):
        if key not in entries:
            raise DataError(f"{manifest_path}: missing required key {key!r}")

    cubes_arr = read_tensor(base / entries["cubes"])
    months_arr = read_tensor(base / entries["months"])
    ground_arr = read_tensor(base / entries["ground"])
    if cubes_arr.ndim != 5:
        raise DataError(f"cubes tensor must be rank 5, got rank {cubes_arr.ndim}")
    if months_arr.ndim != 2:
        raise DataError(f"months tensor must be rank 2, got rank {months_arr.ndim}")
    if ground_arr.ndim != 3 or ground_arr.shape[1] != 4:
        raise DataError("ground tensor must be N x 4 x D")
    n = cubes_arr.shape[0]
    if months_arr.shape[0] != n or ground_arr.shape[0] != n:
        raise CountMismatchError(
            f"row counts differ: cubes {n}, months {months_arr.shape[0]}, "
            f"ground {ground_arr.shape[0]}"
        )
    if months_arr.shape[1] != cubes_arr.shape[1]:
        raise CountMismatchError("months and cubes disagree on T")

    if "sites" in entries:
        with open(base / entries["sites"], newline="", encoding="utf-8") as f:
            reader = csv.reader(f)
            header = next(reader, None)
            if header != ["site_id"]:
                raise DataError("sites CSV must have header 'site_id'")
            site_ids = [row[0] for row in reader if row]
        if len(site_ids) != n:
            raise CountMismatchError(
                f"sites CSV lists {len(site_ids)} ids for {n} tensor rows"
            )
    else:
        site_ids = [str(i) for i in range(n)]

    months_int = np.rint(months_arr).astype(np.int64)
    cubes = [
        SpectralTemporalCube(sid, months_int[i], cubes_arr[i].astype(np.float64))
        for i, sid in enumerate(site_ids)
    ]
    grounds = [
        GroundEmbeddingSet(sid, ground_arr[i].astype(np.float64))
        for i, sid in enumerate(site_ids)
    ]

    labels = {}
    for key, rel in entries.items():
        if key.startswith("labels."):
            taxonomy = key[len("labels.") :]
            labels[taxonomy] = read_label_csv(base / rel, taxonomy)
    scenicness = {}
    if "scenicness" in entries:
        scenicness = read_scenicness_csv(base / entries["scenicness"])

    return LabeledDataset(cubes, grounds, labels, scenicness).validate()


def save_dataset_tensors(
    out_dir,
    cubes: np.ndarray,
    months: np.ndarray,
    ground: np.ndarray,
    site_ids: list[str],
    labels: dict[str, dict[str, str]],
    scenicness: dict[str, float] | None = None,
    manifest_name: str = "manifest.txt",
) -> Path:
    """Write dataset arrays plus manifest under `out_dir`; returns manifest path."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    write_tensor(out_dir / "cubes.tsr", cubes)
    write_tensor(out_dir / "months.tsr", months.astype(np.float32))
    write_tensor(out_dir / "ground.tsr", ground)
    with open(out_dir / "sites.csv", "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f)
        writer.writerow(["site_id"])
        for sid in site_ids:
            writer.writerow([sid])
    entries = {
        "cubes": "cubes.tsr",
        "months": "months.tsr",
        "ground": "ground.tsr",
        "sites": "sites.csv",
    }
    for taxonomy, table in labels.items():
        name = f"labels_{taxonomy}.csv"
        write_label_csv(out_dir / name, taxonomy, table)
        entries[f"labels.{taxonomy}"] = name
    if scenicness:
        write_scenicness_csv(out_dir / "scenicness.csv", scenicness)
        entries["scenicness"] = "scenicness.csv"
    manifest = out_dir / manifest_name
    write_manifest(manifest, entries)
    return manifest


def load_prompt_table(path) -> PromptEmbeddingTable:
    """Read a prompt table manifest (taxonomy=, classes=, vectors=, values=)."""
    path = Path(path)
    entries = read_manifest(path)
    for key in ("taxonomy", "classes", "vectors"):
        if key not in entries:
            raise DataError(f"{path}: prompt table missing key {key!r}")
    base = path.parent
    with open(base / entries["classes"], newline="", encoding="utf-8") as f:
        reader = csv.reader(f)
        header = next(reader, None)
        if header is None or header[0] != "class":
            raise DataError("prompt classes CSV must have 'class' first column")
        has_values = len(header) > 1 and header[1] == "value"
        names, values = [], []
        for row in reader:
            if not row:
                continue
            names.append(row[0])
            if has_values:
                values.append(float(row[1]))
    vectors = read_tensor(base / entries["vectors"]).astype(np.float64)
    if vectors.ndim != 3:
        raise DataError("prompt vectors tensor must be n_classes x P x D")
    table = PromptEmbeddingTable(
        taxonomy=entries["taxonomy"],
        classes=names,
        vectors=vectors,
        values=np.asarray(values, dtype=np.float64) if has_values else None,
    )
    return table.validate()


def save_prompt_table(out_dir, table: PromptEmbeddingTable, name: str) -> Path:
    """Write a prompt table beside its manifest; returns the manifest path."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    vec_name = f"{name}_vectors.tsr"
    cls_name = f"{name}_classes.csv"
    write_tensor(out_dir / vec_name, table.vectors)
    with open(out_dir / cls_name, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f)
        if table.values is not None:
            writer.writerow(["class", "value"])
            for cname, val in zip(table.classes, table.values):
                writer.writerow([cname, f"{val:.6f}"])
        else:
            writer.writerow(["class"])
            for cname in table.classes:
                writer.writerow([cname])
    manifest = out_dir / f"{name}.prompts"
    write_manifest(
        manifest,
        {"taxonomy": table.taxonomy, "classes": cls_name, "vectors": vec_name},
    )
    return manifest
