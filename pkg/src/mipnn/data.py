"""Tabular ingestion and encoding.

Categorical columns are one-hot encoded, numerical columns are min-max scaled
into ``[0, 1]`` with statistics fitted on the training table only, and the
label column becomes a ``+1/-1`` matrix with one column per class.
"""

from __future__ import annotations

import json
import logging
import warnings
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Sequence

import numpy as np
import pandas as pd

from mipnn.errors import InputError, ParseError

log = logging.getLogger(__name__)

KINDS = ("categorical", "numerical", "label")
MISSING_TOKENS = ("", "?")


@dataclass(frozen=True)
class Column:
    name: str
    kind: str
    categories: tuple[str, ...] | None = None
    minimum: float | None = None
    maximum: float | None = None
    # raw spellings folded onto a canonical value, e.g. {">50K.": ">50K"}
    aliases: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise InputError(f"column {self.name!r}: unknown kind {self.kind!r}")
        if self.categories is not None:
            cats = tuple(str(c) for c in self.categories)
            if not cats:
                raise InputError(f"column {self.name!r}: empty category list")
            if len(set(cats)) != len(cats):
                raise InputError(f"column {self.name!r}: duplicate categories")
            object.__setattr__(self, "categories", cats)
        if self.minimum is not None and self.maximum is not None and self.minimum > self.maximum:
            raise InputError(f"column {self.name!r}: min > max")

    @property
    def width(self) -> int:
        if self.kind == "numerical":
            return 1
        if self.categories is None:
            raise InputError(f"column {self.name!r} is not fitted")
        return len(self.categories)


@dataclass(frozen=True)
class Schema:
    columns: tuple[Column, ...]

    def __post_init__(self):
        object.__setattr__(self, "columns", tuple(self.columns))
        names = [c.name for c in self.columns]
        if len(set(names)) != len(names):
            raise InputError("schema has duplicate column names")
        n_label = sum(c.kind == "label" for c in self.columns)
        if n_label != 1:
            raise InputError(f"schema needs exactly one label column, found {n_label}")

    @property
    def names(self) -> list[str]:
        return [c.name for c in self.columns]

    @property
    def label(self) -> Column:
        return next(c for c in self.columns if c.kind == "label")

    @property
    def attributes(self) -> list[Column]:
        return [c for c in self.columns if c.kind != "label"]

    @property
    def is_fitted(self) -> bool:
        return all(
            c.categories is not None if c.kind != "numerical" else c.minimum is not None
            for c in self.columns
        )

    def feature_names(self) -> list[str]:
        names = []
        for col in self.attributes:
            if col.kind == "numerical":
                names.append(col.name)
            else:
                names.extend(f"{col.name}={cat}" for cat in col.categories)
        return names

    def to_list(self) -> list[dict]:
        out = []
        for c in self.columns:
            entry = {"name": c.name, "kind": c.kind}
            if c.categories is not None:
                entry["categories"] = list(c.categories)
            if c.minimum is not None:
                entry["min"] = c.minimum
                entry["max"] = c.maximum
            if c.aliases:
                entry["aliases"] = dict(c.aliases)
            out.append(entry)
        return out

    @classmethod
    def from_list(cls, entries: Sequence[dict]) -> "Schema":
        columns = []
        for i, entry in enumerate(entries):
            if not isinstance(entry, dict) or "name" not in entry or "kind" not in entry:
                raise InputError(f"schema entry {i} needs 'name' and 'kind'")
            columns.append(
                Column(
                    name=str(entry["name"]),
                    kind=entry["kind"],
                    categories=entry.get("categories"),
                    minimum=entry.get("min"),
                    maximum=entry.get("max"),
                    aliases=dict(entry.get("aliases", {})),
                )
            )
        return cls(tuple(columns))

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_list(), indent=1) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path) -> "Schema":
        path = Path(path)
        try:
            doc = json.loads(path.read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise ParseError(exc.msg, path=path, line=exc.lineno) from exc
        if isinstance(doc, dict) and "columns" in doc:
            doc = doc["columns"]
        if not isinstance(doc, list):
            raise ParseError("schema must be a list of columns", path=path)
        return cls.from_list(doc)


@dataclass
class RawTable:
    """Typed rows restricted to the schema's columns.

    Categorical and label cells are stripped strings, numerical cells floats.
    """

    frame: pd.DataFrame
    dropped: int = 0
    rejected: int = 0

    def __len__(self):
        return len(self.frame)


@dataclass(frozen=True, eq=False)
class EncodedDataset:
    features: np.ndarray
    labels: np.ndarray
    class_names: tuple[str, ...]
    feature_names: tuple[str, ...] = ()
    schema: Schema | None = None
    rejected: int = 0

    def __post_init__(self):
        X = np.asarray(self.features, dtype=float)
        Y = np.asarray(self.labels, dtype=np.int64)
        if X.ndim != 2 or Y.ndim != 2 or len(X) != len(Y):
            raise InputError(f"features {X.shape} and labels {Y.shape} do not match")
        if X.size and (X.min() < 0 or X.max() > 1):
            raise InputError("features must lie in [0, 1]")
        if Y.size and (not np.all(np.isin(Y, (-1, 1))) or not np.all((Y == 1).sum(axis=1) == 1)):
            raise InputError("each label row needs exactly one +1 and -1 elsewhere")
        if len(self.class_names) != Y.shape[1]:
            raise InputError("one class name per label column required")
        X.setflags(write=False)
        Y.setflags(write=False)
        object.__setattr__(self, "features", X)
        object.__setattr__(self, "labels", Y)
        object.__setattr__(self, "class_names", tuple(self.class_names))
        object.__setattr__(self, "feature_names", tuple(self.feature_names))

    def __len__(self):
        return len(self.features)

    @property
    def n_features(self) -> int:
        return self.features.shape[1]

    @property
    def n_classes(self) -> int:
        return self.labels.shape[1]

    @property
    def target(self) -> np.ndarray:
        """True class index of every sample."""
        return np.argmax(self.labels, axis=1)

    def take(self, indices) -> "EncodedDataset":
        indices = np.asarray(indices, dtype=np.int64)
        return replace(self, features=self.features[indices], labels=self.labels[indices], rejected=0)


def _canonical(value: str, column: Column) -> str:
    return column.aliases.get(value, value)


def load_csv(path, schema: Schema, *, header: bool = True, missing: Sequence[str] = MISSING_TOKENS) -> RawTable:
    """Read a comma-separated file into a :class:`RawTable`.

    Without a header row the file's columns are named after the schema, in
    order.  Rows with missing values in schema columns are dropped; rows with
    malformed numbers or categories unknown to a pre-fitted schema are
    rejected.  Both are counted.
    """
    path = Path(path)
    if not path.is_file():
        raise InputError(f"dataset file not found: {path}")
    try:
        frame = pd.read_csv(
            path,
            dtype=str,
            header=0 if header else None,
            names=None if header else schema.names,
            skipinitialspace=True,
            keep_default_na=False,
            encoding="utf-8",
        )
    except (pd.errors.ParserError, UnicodeDecodeError) as exc:
        raise ParseError(str(exc), path=path) from exc
    frame.columns = [str(c).strip() for c in frame.columns]
    absent = [name for name in schema.names if name not in frame.columns]
    if absent:
        raise ParseError(f"header lacks schema columns {absent}", path=path, line=1)
    frame = frame[schema.names].apply(lambda s: s.str.strip())

    is_missing = frame.isin(list(missing)).any(axis=1)
    dropped = int(is_missing.sum())
    frame = frame[~is_missing]

    keep = pd.Series(True, index=frame.index)
    typed = {}
    for col in schema.columns:
        if col.kind == "numerical":
            values = pd.to_numeric(frame[col.name], errors="coerce")
            keep &= values.notna() & np.isfinite(values)
            typed[col.name] = values
        else:
            values = frame[col.name].map(lambda v, c=col: _canonical(v, c))
            if col.categories is not None:
                keep &= values.isin(col.categories)
            typed[col.name] = values
    table = pd.DataFrame(typed)[keep].reset_index(drop=True)
    rejected = int((~keep).sum())
    if dropped or rejected:
        log.info("%s: dropped %d rows with missing values, rejected %d", path, dropped, rejected)
    return RawTable(table, dropped=dropped, rejected=rejected)


def fit_schema(train: RawTable, schema: Schema) -> Schema:
    """Fill in category lists and numeric ranges from the training table."""
    columns = []
    for col in schema.columns:
        if col.name not in train.frame.columns:
            raise InputError(f"training table lacks column {col.name!r}")
        values = train.frame[col.name]
        if col.kind == "numerical":
            if len(values) == 0:
                raise InputError("cannot fit a schema on an empty table")
            lo, hi = float(values.min()), float(values.max())
            if lo == hi:
                warnings.warn(f"numerical column {col.name!r} is constant; it encodes to 0", stacklevel=2)
            columns.append(replace(col, minimum=lo, maximum=hi))
        elif col.categories is None:
            columns.append(replace(col, categories=tuple(sorted(values.astype(str).unique()))))
        else:
            columns.append(col)
    return Schema(tuple(columns))


def encode(table: RawTable, schema: Schema) -> EncodedDataset:
    """Encode a table with a fitted schema.  Rows with unseen categories are rejected."""
    if not schema.is_fitted:
        raise InputError("schema must be fitted before encoding")
    frame = table.frame
    known = pd.Series(True, index=frame.index)
    for col in schema.columns:
        if col.kind != "numerical":
            known &= frame[col.name].isin(col.categories)
    rejected = int((~known).sum())
    frame = frame[known]

    blocks = []
    for col in schema.attributes:
        values = frame[col.name]
        if col.kind == "numerical":
            span = col.maximum - col.minimum
            if span == 0:
                scaled = np.zeros(len(values))
            else:
                scaled = (values.to_numpy(dtype=float) - col.minimum) / span
            blocks.append(np.clip(scaled, 0.0, 1.0)[:, None])
        else:
            codes = pd.Categorical(values, categories=col.categories).codes
            blocks.append(np.eye(len(col.categories))[codes])
    n = len(frame)
    features = np.hstack(blocks) if blocks else np.zeros((n, 0))
    label = schema.label
    codes = pd.Categorical(frame[label.name], categories=label.categories).codes
    labels = np.where(np.eye(len(label.categories), dtype=bool)[codes], 1, -1)
    return EncodedDataset(
        features,
        labels.reshape(n, len(label.categories)),
        label.categories,
        tuple(schema.feature_names()),
        schema,
        rejected=table.rejected + rejected,
    )


def fit_encode(train: RawTable, test: RawTable, schema: Schema) -> tuple[EncodedDataset, EncodedDataset]:
    """Fit encodings on ``train`` and apply them to both tables."""
    if list(train.frame.columns) != list(test.frame.columns):
        raise InputError("train and test tables have different columns")
    fitted = fit_schema(train, schema)
    return encode(train, fitted), encode(test, fitted)


def subsample(data: EncodedDataset, n: int, seed: int) -> EncodedDataset:
    """Uniform sample of ``n`` rows without replacement, fixed by ``seed``."""
    if not 1 <= n <= len(data):
        raise InputError(f"cannot draw {n} samples from {len(data)}")
    idx = np.random.default_rng(seed).choice(len(data), size=n, replace=False)
    return data.take(idx)


def save_encoded(data: EncodedDataset, directory) -> None:
    """Write ``features.csv``, ``labels.csv`` and ``schema.json`` into ``directory``."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    pd.DataFrame(data.features, columns=list(data.feature_names) or None).to_csv(
        directory / "features.csv", index=False, float_format="%.17g"
    )
    pd.DataFrame(data.labels, columns=list(data.class_names)).to_csv(directory / "labels.csv", index=False)
    meta = {"class_names": list(data.class_names), "feature_names": list(data.feature_names)}
    if data.schema is not None:
        meta["schema"] = data.schema.to_list()
    (directory / "schema.json").write_text(json.dumps(meta, indent=1) + "\n", encoding="utf-8")


def load_encoded(directory) -> EncodedDataset:
    directory = Path(directory)
    meta = json.loads((directory / "schema.json").read_text(encoding="utf-8"))
    features = pd.read_csv(directory / "features.csv", float_precision="round_trip").to_numpy(dtype=float)
    labels = pd.read_csv(directory / "labels.csv").to_numpy(dtype=np.int64)
    schema = Schema.from_list(meta["schema"]) if "schema" in meta else None
    return EncodedDataset(features, labels, tuple(meta["class_names"]), tuple(meta["feature_names"]), schema)


def from_arrays(features, target, n_classes: int = 2, class_names=None) -> EncodedDataset:
    """Build a dataset from a feature matrix and integer class indices."""
    target = np.asarray(target, dtype=np.int64)
    labels = -np.ones((len(target), n_classes), dtype=np.int64)
    labels[np.arange(len(target)), target] = 1
    names = class_names or tuple(str(c) for c in range(n_classes))
    return EncodedDataset(np.asarray(features, dtype=float), labels, names)


# -- bundled synthetic data ---------------------------------------------------

SYNTHETIC_SCHEMA = Schema(
    (
        Column("x1", "numerical"),
        Column("x2", "numerical"),
        Column("x3", "numerical"),
        Column("colour", "categorical", ("blue", "green", "red")),
        Column("size", "categorical", ("large", "small")),
        Column("class", "label", ("neg", "pos")),
    )
)


def synthetic_frame(n: int, seed: int) -> pd.DataFrame:
    """Adult-like mixed table with a mostly linear decision rule."""
    rng = np.random.default_rng(seed)
    x1 = rng.uniform(0, 100, n).round(1)
    x2 = rng.uniform(0, 100, n).round(1)
    x3 = rng.integers(0, 40, n)
    colour = rng.choice(["blue", "green", "red"], n)
    size = rng.choice(["large", "small"], n, p=[0.4, 0.6])
    score = 0.6 * x1 / 100 - 0.5 * x2 / 100 + 0.3 * (colour == "red") + 0.2 * (size == "large")
    flip = rng.random(n) < 0.03
    label = np.where((score > 0.2) ^ flip, "pos", "neg")
    return pd.DataFrame({"x1": x1, "x2": x2, "x3": x3, "colour": colour, "size": size, "class": label})


def synthetic_tables(n_train: int = 400, n_test: int = 200, seed: int = 0) -> tuple[RawTable, RawTable, Schema]:
    train = synthetic_frame(n_train, seed)
    test = synthetic_frame(n_test, seed + 1)
    schema = SYNTHETIC_SCHEMA
    as_raw = lambda df: RawTable(df.astype({"colour": str, "size": str, "class": str}).reset_index(drop=True))
    return as_raw(train), as_raw(test), schema


def write_synthetic(directory, n_train: int = 400, n_test: int = 200, seed: int = 0) -> dict:
    """Write the synthetic train/test CSVs and schema; return their paths."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    paths = {
        "train": directory / "synthetic_train.csv",
        "test": directory / "synthetic_test.csv",
        "schema": directory / "synthetic_schema.json",
    }
    synthetic_frame(n_train, seed).to_csv(paths["train"], index=False)
    synthetic_frame(n_test, seed + 1).to_csv(paths["test"], index=False)
    SYNTHETIC_SCHEMA.save(paths["schema"])
    return paths


def make_separable(n: int = 40, seed: int = 0, gap: float = 0.1) -> EncodedDataset:
    """Two features in the unit square, class 1 iff ``x1 + x2 > 1``.

    Points closer than ``gap / 2`` to the separating line are resampled, so the
    classes are separated by a margin.
    """
    rng = np.random.default_rng(seed)
    points = []
    while len(points) < n:
        p = rng.uniform(0, 1, 2)
        if abs(p.sum() - 1.0) >= gap / 2:
            points.append(p)
    X = np.array(points)
    target = (X.sum(axis=1) > 1.0).astype(np.int64)
    return from_arrays(X, target, 2, ("below", "above"))
