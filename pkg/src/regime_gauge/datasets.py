"""Tabular data with temporal environments, and a synthetic shift generator.

Rows carry an environment tag: ``A`` is the training era, ``B`` the
near-term shift and ``C`` the far-term shift.  Standardisation statistics
always come from a single environment (normally ``A``) and are then frozen.
"""

from __future__ import annotations

import csv
import functools
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Sequence

import numpy as np
from numpy.polynomial.hermite_e import hermegauss
from scipy.optimize import brentq

from ._rng import make_rng

ENVIRONMENTS = ("A", "B", "C")
MISSING_TOKENS = frozenset({"", "na", "nan", "null", "none", "?"})


class DataError(ValueError):
    """Raised for malformed input data; messages name the offending row/column."""


@dataclass(frozen=True)
class TabularDataset:
    features: np.ndarray
    labels: np.ndarray
    env: np.ndarray
    feature_names: tuple[str, ...]
    dropped: int = 0
    meta: dict[str, Any] = field(default_factory=dict, compare=False)

    def __post_init__(self) -> None:
        X = np.asarray(self.features, dtype=float)
        if X.ndim != 2:
            raise DataError("features must be a 2-D matrix")
        y = np.asarray(self.labels)
        env = np.asarray(self.env, dtype="<U1")
        names = tuple(self.feature_names)
        if y.shape != (X.shape[0],) or env.shape != (X.shape[0],):
            raise DataError("features, labels and env must have the same number of rows")
        if len(names) != X.shape[1]:
            raise DataError(f"{len(names)} feature names for {X.shape[1]} columns")
        if len(set(names)) != len(names):
            raise DataError("feature names must be unique")
        if not np.all(np.isin(y, (0, 1))):
            raise DataError("labels must be binary 0/1")
        bad = sorted(set(env.tolist()) - set(ENVIRONMENTS))
        if bad:
            raise DataError(f"unknown environment tags: {bad}")
        if not np.all(np.isfinite(X)):
            raise DataError("features contain missing or non-finite values")
        object.__setattr__(self, "features", X)
        object.__setattr__(self, "labels", y.astype(np.int64))
        object.__setattr__(self, "env", env)
        object.__setattr__(self, "feature_names", names)

    @property
    def n_rows(self) -> int:
        return self.features.shape[0]

    @property
    def environments(self) -> tuple[str, ...]:
        present = set(self.env.tolist())
        return tuple(e for e in ENVIRONMENTS if e in present)

    def env_counts(self) -> dict[str, int]:
        return {e: int(np.sum(self.env == e)) for e in self.environments}

    def mask(self, env: str) -> np.ndarray:
        return self.env == env

    def subset(self, env: str) -> TabularDataset:
        m = self.mask(env)
        return replace(self, features=self.features[m], labels=self.labels[m], env=self.env[m])

    def column_indices(self, names: Sequence[str]) -> list[int]:
        lookup = {n: i for i, n in enumerate(self.feature_names)}
        missing = [n for n in names if n not in lookup]
        if missing:
            raise DataError(f"unknown feature columns: {', '.join(missing)}")
        return [lookup[n] for n in names]

    @classmethod
    def concat(cls, parts: Sequence[TabularDataset]) -> TabularDataset:
        names = parts[0].feature_names
        if any(p.feature_names != names for p in parts):
            raise DataError("cannot concatenate datasets with different columns")
        meta: dict[str, Any] = {}
        for p in parts:
            meta.update(p.meta)
        return cls(
            np.vstack([p.features for p in parts]),
            np.concatenate([p.labels for p in parts]),
            np.concatenate([p.env for p in parts]),
            names,
            sum(p.dropped for p in parts),
            meta,
        )

    def write_csv(self, path: str | Path, label_column: str = "label", env_column: str = "env") -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow([*self.feature_names, label_column, env_column])
            for x, y, e in zip(self.features, self.labels, self.env):
                w.writerow([*(repr(float(v)) for v in x), int(y), e])


def _parse_label(raw: str, rownum: int, column: str) -> int:
    try:
        value = float(raw)
    except ValueError:
        raise DataError(f"row {rownum}: label column {column!r} has non-numeric value {raw!r}") from None
    if value not in (0.0, 1.0):
        raise DataError(f"row {rownum}: label {raw!r} in column {column!r} is not 0 or 1")
    return int(value)


def load_csv(path: str | Path, label_column: str = "label", env_column: str = "env") -> TabularDataset:
    """Read a headered CSV into a :class:`TabularDataset`.

    Every column other than the label and environment columns is a numeric
    feature.  Rows with a missing value anywhere are dropped and counted in
    ``dropped``; a present but non-numeric value is an error.  Row numbers in
    error messages count the header as row 1.
    """
    path = Path(path)
    if not path.exists():
        raise DataError(f"no such file: {path}")
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise DataError(f"{path}: empty file, header row required") from None
        for col in (label_column, env_column):
            if col not in header:
                raise DataError(f"{path}: missing required column {col!r}")
        li, ei = header.index(label_column), header.index(env_column)
        feat_idx = [i for i in range(len(header)) if i not in (li, ei)]
        names = tuple(header[i] for i in feat_idx)

        rows: list[list[float]] = []
        labels: list[int] = []
        envs: list[str] = []
        dropped = 0
        for rownum, rec in enumerate(reader, start=2):
            if not rec or all(not c.strip() for c in rec):
                continue
            if len(rec) != len(header):
                raise DataError(f"row {rownum}: expected {len(header)} fields, found {len(rec)}")
            cells = [c.strip() for c in rec]
            if any(c.lower() in MISSING_TOKENS for c in cells):
                dropped += 1
                continue
            env = cells[ei]
            if env not in ENVIRONMENTS:
                raise DataError(f"row {rownum}: environment {env!r} not in {{A, B, C}}")
            values = []
            for i in feat_idx:
                try:
                    values.append(float(cells[i]))
                except ValueError:
                    raise DataError(
                        f"row {rownum}, column {header[i]!r}: non-numeric value {cells[i]!r}"
                    ) from None
                if not math.isfinite(values[-1]):
                    raise DataError(f"row {rownum}, column {header[i]!r}: non-finite value {cells[i]!r}")
            labels.append(_parse_label(cells[li], rownum, label_column))
            envs.append(env)
            rows.append(values)

    X = np.array(rows, dtype=float).reshape(len(rows), len(names))
    return TabularDataset(X, np.array(labels, dtype=np.int64), np.array(envs, dtype="<U1"), names, dropped,
                          {"source": str(path)})



def load_matrix(path: str | Path, exclude: Sequence[str] = ("label", "env")) -> tuple[np.ndarray, tuple[str, ...], int]:
    """Numeric feature matrix from a headered CSV, ignoring ``exclude`` columns if present.

    Returns ``(X, names, dropped)`` with rows holding missing values dropped.
    """
    path = Path(path)
    if not path.exists():
        raise DataError(f"no such file: {path}")
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise DataError(f"{path}: empty file, header row required") from None
        keep = [i for i, h in enumerate(header) if h not in exclude]
        if not keep:
            raise DataError(f"{path}: no feature columns")
        rows, dropped = [], 0
        for rownum, rec in enumerate(reader, start=2):
            if not rec or all(not c.strip() for c in rec):
                continue
            if len(rec) != len(header):
                raise DataError(f"row {rownum}: expected {len(header)} fields, found {len(rec)}")
            cells = [rec[i].strip() for i in keep]
            if any(c.lower() in MISSING_TOKENS for c in cells):
                dropped += 1
                continue
            try:
                rows.append([float(c) for c in cells])
            except ValueError:
                bad = next(i for i, c in zip(keep, cells) if not _is_number(c))
                raise DataError(f"row {rownum}, column {header[bad]!r}: non-numeric value {rec[bad].strip()!r}") from None
    return np.array(rows, dtype=float).reshape(len(rows), len(keep)), tuple(header[i] for i in keep), dropped


def _is_number(text: str) -> bool:
    try:
        float(text)
    except ValueError:
        return False
    return True

@dataclass(frozen=True)
class Standardizer:
    means: np.ndarray
    scales: np.ndarray
    fitted_on: str
    constant: np.ndarray

    def __post_init__(self) -> None:
        if np.any(self.scales <= 0):
            raise ValueError("standardizer scales must be positive")
        for name in ("means", "scales", "constant"):
            arr = np.array(getattr(self, name))
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    def transform(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        if X.ndim != 2 or X.shape[1] != self.means.size:
            raise ValueError(f"expected {self.means.size} feature columns, got shape {X.shape}")
        return (X - self.means) / self.scales

    def to_dict(self) -> dict[str, Any]:
        return {
            "means": self.means.tolist(),
            "scales": self.scales.tolist(),
            "fitted_on": self.fitted_on,
            "constant": self.constant.astype(bool).tolist(),
        }

    @classmethod
    def from_dict(cls, doc: dict[str, Any]) -> Standardizer:
        return cls(
            np.asarray(doc["means"], dtype=float),
            np.asarray(doc["scales"], dtype=float),
            str(doc["fitted_on"]),
            np.asarray(doc["constant"], dtype=bool),
        )


def fit_standardizer(data: TabularDataset, env: str = "A") -> Standardizer:
    """Per-column mean and population standard deviation over ``env`` rows."""
    X = data.features[data.mask(env)]
    if X.shape[0] == 0:
        raise DataError(f"environment {env!r} has no rows")
    means = X.mean(axis=0)
    sd = np.sqrt(np.mean((X - means) ** 2, axis=0))
    constant = sd == 0
    return Standardizer(means, np.where(constant, 1.0, sd), env, constant)


# ---------------------------------------------------------------------------
# synthetic non-stationary generator


@dataclass(frozen=True)
class SimConfig:
    """Configuration of the spurious-covariate shift generator.

    ``spurious_strength`` is the per-feature class-mean shift ``a`` in
    ``a * (2y - 1) + noise``.  The default 0.0625 gives the full 64-feature
    spurious block a class separation of ``sqrt(64) * a / noise_sd = 0.5``
    noise units, comparable to the invariant signal, so that spurious
    features are harmful when most of them flip and roughly neutral when
    most persist.
    """

    rho: float = 0.25
    n_invariant: int = 4
    max_spurious: int = 64
    n_per_env: int = 2000
    spurious_strength: float = 0.0625
    noise_sd: float = 1.0
    repetitions: int = 20
    seed: int = 42
    bayes_accuracy: float = 0.8

    def __post_init__(self) -> None:
        if not 0.0 <= self.rho <= 1.0:
            raise ValueError("rho must lie in [0, 1]")
        for name in ("n_invariant", "max_spurious", "n_per_env", "repetitions"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if self.noise_sd <= 0:
            raise ValueError("noise_sd must be positive")
        if not 0.5 < self.bayes_accuracy < 1.0:
            raise ValueError("bayes_accuracy must lie in (0.5, 1)")
        if self.seed < 0:
            raise ValueError("seed must be non-negative")


_HERMITE_X, _HERMITE_W = hermegauss(96)
_HERMITE_W = _HERMITE_W / _HERMITE_W.sum()


def _bayes_accuracy(scale: float) -> float:
    # logit = scale * z with z ~ N(0, 1); Bayes rule is right with prob sigma(|logit|)
    return float(np.dot(_HERMITE_W, 1.0 / (1.0 + np.exp(-scale * np.abs(_HERMITE_X)))))


@functools.lru_cache(maxsize=None)
def invariant_logit_scale(bayes_accuracy: float = 0.8) -> float:
    """Norm of the invariant weight vector giving the requested Bayes accuracy."""
    return brentq(lambda c: _bayes_accuracy(c) - bayes_accuracy, 1e-6, 100.0, xtol=1e-13)


def invariant_weights(config: SimConfig) -> np.ndarray:
    direction = np.full(config.n_invariant, 1.0 / math.sqrt(config.n_invariant))
    return invariant_logit_scale(config.bayes_accuracy) * direction


def feature_names_for(config: SimConfig, m: int) -> tuple[str, ...]:
    inv = tuple(f"inv_{i}" for i in range(config.n_invariant))
    return inv + tuple(f"spur_{j}" for j in range(m))


# stream ids for make_rng
_STREAM_FLIPS, _STREAM_TRAIN, _STREAM_OOD = 0, 1, 2


def ood_signs(config: SimConfig, repetition: int = 0) -> np.ndarray:
    """Per-feature OOD sign (+1 keep, -1 flip) for one repetition."""
    rng = make_rng(config.seed, repetition, _STREAM_FLIPS)
    keep = rng.random(config.max_spurious) < config.rho
    return np.where(keep, 1.0, -1.0)


def _draw(config: SimConfig, rng: np.random.Generator, signs: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    # always draw the full spurious block so every capacity sees the same rows
    n = config.n_per_env
    x_inv = rng.standard_normal((n, config.n_invariant))
    logit = x_inv @ invariant_weights(config)
    y = (rng.random(n) < 1.0 / (1.0 + np.exp(-logit))).astype(np.int64)
    noise = config.noise_sd * rng.standard_normal((n, config.max_spurious))
    spur = config.spurious_strength * np.outer(2 * y - 1, signs) + noise
    return np.hstack([x_inv, spur]), y


def generate_shifting(
    config: SimConfig, m: int, repetition: int = 0
) -> tuple[TabularDataset, TabularDataset]:
    """Training (env A) and shifted (env C) samples with ``m`` accessible spurious features.

    In-distribution every spurious feature is ``a * (2y - 1) + noise``.  Out
    of distribution each spurious feature keeps its sign with probability
    ``rho`` and flips otherwise, drawn once per repetition.  Labels follow a
    logistic model on the invariant features in both environments.
    """
    if not 0 <= m <= config.max_spurious:
        raise ValueError(f"capacity m={m} outside [0, max_spurious={config.max_spurious}]")
    if repetition < 0:
        raise ValueError("repetition must be non-negative")
    signs = ood_signs(config, repetition)
    Xa, ya = _draw(config, make_rng(config.seed, repetition, _STREAM_TRAIN), np.ones(config.max_spurious))
    Xc, yc = _draw(config, make_rng(config.seed, repetition, _STREAM_OOD), signs)
    cols = config.n_invariant + m
    names = feature_names_for(config, m)
    meta = {"rho": config.rho, "repetition": repetition, "capacity": m, "ood_signs": signs[:m].copy()}
    train = TabularDataset(Xa[:, :cols], ya, np.full(ya.size, "A"), names, 0, dict(meta))
    ood = TabularDataset(Xc[:, :cols], yc, np.full(yc.size, "C"), names, 0, dict(meta))
    return train, ood
