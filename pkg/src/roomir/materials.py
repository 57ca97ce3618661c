"""Acoustic material database, semantic assignment, scattering sampling.

Materials carry octave-band absorption (63 Hz - 8 kHz) and optional
scattering spectra.  Scene labels are matched to materials by truncated
cosine similarity over text embeddings; a deterministic character-trigram
embedder stands in when no embedding table is supplied.
"""

from __future__ import annotations

import csv
import json
import zlib
from dataclasses import dataclass
from pathlib import Path

import numpy as np

OCTAVE_BANDS = (63.0, 125.0, 250.0, 500.0, 1000.0, 2000.0, 4000.0, 8000.0)
N_BANDS = len(OCTAVE_BANDS)
EMBED_DIM = 512

# Scattering is physically negligible below a few hundred Hz; samples in the
# 63-250 Hz bands are capped at this value.
LOW_BAND_SCATTER_CAP = 0.05
LOW_BAND_COUNT = 3

_ABS_COLUMNS = tuple(f"a{int(b)}" for b in OCTAVE_BANDS)
_SCAT_COLUMNS = tuple(f"s{int(b)}" for b in OCTAVE_BANDS)


class MaterialError(ValueError):
    pass


@dataclass
class MaterialRecord:
    name: str
    absorption: np.ndarray
    scattering: np.ndarray | None = None

    def __post_init__(self) -> None:
        if not self.name:
            raise MaterialError("material name must be nonempty")
        self.absorption = np.asarray(self.absorption, dtype=np.float64)
        if self.absorption.shape != (N_BANDS,):
            raise MaterialError(
                f"{self.name}: expected {N_BANDS} absorption bands, got {self.absorption.shape}"
            )
        if np.any((self.absorption < 0) | (self.absorption > 1)):
            raise MaterialError(f"{self.name}: absorption outside [0, 1]")
        if self.scattering is not None:
            self.scattering = np.asarray(self.scattering, dtype=np.float64)
            if self.scattering.shape != (N_BANDS,):
                raise MaterialError(
                    f"{self.name}: expected {N_BANDS} scattering bands"
                )
            if np.any((self.scattering < 0) | (self.scattering > 1)):
                raise MaterialError(f"{self.name}: scattering outside [0, 1]")


def load_material_db(path: str | Path) -> list[MaterialRecord]:
    """Load materials from CSV with header name,a63..a8000[,s63..s8000]."""
    path = Path(path)
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise MaterialError(f"{path}: empty file") from None
        header = [h.strip() for h in header]
        expected = ["name", *_ABS_COLUMNS]
        if header[: len(expected)] != expected:
            raise MaterialError(
                f"{path}: header must start with {','.join(expected)}, got {','.join(header)}"
            )
        has_scatter = len(header) > len(expected)
        if has_scatter and header[len(expected) :] != list(_SCAT_COLUMNS):
            raise MaterialError(
                f"{path}: scattering columns must be {','.join(_SCAT_COLUMNS)}"
            )

        records: list[MaterialRecord] = []
        for rownum, row in enumerate(reader, start=2):
            if not row or all(not cell.strip() for cell in row):
                continue
            if len(row) != len(header):
                raise MaterialError(
                    f"{path}: row {rownum}: expected {len(header)} columns, got {len(row)}"
                )
            name = row[0].strip()
            absorption = _parse_band_row(row[1 : 1 + N_BANDS], _ABS_COLUMNS, path, rownum)
            scattering = None
            if has_scatter:
                scattering = _parse_band_row(
                    row[1 + N_BANDS :], _SCAT_COLUMNS, path, rownum
                )
            try:
                records.append(
                    MaterialRecord(name=name, absorption=absorption, scattering=scattering)
                )
            except MaterialError as exc:
                raise MaterialError(f"{path}: row {rownum}: {exc}") from exc
    if not records:
        raise MaterialError(f"{path}: no material rows")
    return records


def _parse_band_row(cells, columns, path, rownum) -> np.ndarray:
    values = []
    for cell, col in zip(cells, columns):
        try:
            value = float(cell)
        except ValueError:
            raise MaterialError(
                f"{path}: row {rownum}, column {col}: not a number: {cell!r}"
            ) from None
        if not 0.0 <= value <= 1.0:
            raise MaterialError(
                f"{path}: row {rownum}, column {col}: coefficient {value} outside [0, 1]"
            )
        values.append(value)
    return np.asarray(values)


# ---------------------------------------------------------------------------
# Embeddings
# ---------------------------------------------------------------------------


@dataclass
class EmbeddingTable:
    entries: dict[str, np.ndarray]
    dimension: int = EMBED_DIM

    def __post_init__(self) -> None:
        for name, vec in self.entries.items():
            vec = np.asarray(vec, dtype=np.float64)
            if vec.shape != (self.dimension,):
                raise MaterialError(
                    f"embedding for {name!r} has dimension {vec.shape}, expected {self.dimension}"
                )
            if not np.all(np.isfinite(vec)):
                raise MaterialError(f"embedding for {name!r} has non-finite components")
            self.entries[name] = vec

    def get(self, name: str) -> np.ndarray | None:
        return self.entries.get(name)


def load_embedding_table(path: str | Path) -> EmbeddingTable:
    """Read the JSON embedding file: {"dimension": D, "entries": {name: [..]}}."""
    data = json.loads(Path(path).read_text())
    if "dimension" not in data or "entries" not in data:
        raise MaterialError(f"{path}: embedding file needs 'dimension' and 'entries'")
    entries = {k: np.asarray(v, dtype=np.float64) for k, v in data["entries"].items()}
    return EmbeddingTable(entries=entries, dimension=int(data["dimension"]))


def save_embedding_table(table: EmbeddingTable, path: str | Path) -> None:
    payload = {
        "dimension": table.dimension,
        "entries": {k: [float(x) for x in v] for k, v in table.entries.items()},
    }
    Path(path).write_text(json.dumps(payload))


def fallback_embed(text: str, dim: int = EMBED_DIM) -> np.ndarray:
    """Deterministic hashed character-trigram embedding, L2-normalized.

    Empty or whitespace-only text maps to the zero vector.
    """
    vec = np.zeros(dim)
    lowered = text.lower()
    if not lowered.strip():
        return vec
    for i in range(len(lowered) - 2):
        trigram = lowered[i : i + 3]
        bucket = zlib.crc32(trigram.encode("utf-8")) % dim
        vec[bucket] += 1.0
    norm = np.linalg.norm(vec)
    if norm > 0:
        vec /= norm
    return vec


def cosine_similarity(a: np.ndarray, b: np.ndarray) -> float:
    na = np.linalg.norm(a)
    nb = np.linalg.norm(b)
    if na == 0 or nb == 0:
        return 0.0
    return float(np.dot(a, b) / (na * nb))


# ---------------------------------------------------------------------------
# Assignment (truncated-cosine weighted sampling)
# ---------------------------------------------------------------------------


@dataclass
class AssignmentDistribution:
    """Sampling weights over candidate materials for one scene label."""

    label: str
    material_names: list[str]
    weights: np.ndarray
    probabilities: np.ndarray
    chosen: int | None = None

    def __post_init__(self) -> None:
        self.weights = np.asarray(self.weights, dtype=np.float64)
        self.probabilities = np.asarray(self.probabilities, dtype=np.float64)
        if np.any(self.weights < 0):
            raise MaterialError("assignment weights must be >= 0")
        if abs(self.probabilities.sum() - 1.0) > 1e-12:
            raise MaterialError(
                f"probabilities sum to {self.probabilities.sum()}, expected 1"
            )


def assignment_distribution(
    label: str,
    materials: list[MaterialRecord],
    embeddings: EmbeddingTable | None = None,
) -> AssignmentDistribution:
    """Weights w_i = max(0, cos(label, material_i)); uniform when all zero.

    Names missing from the embedding table fall back to the trigram embedder,
    applied the same way to the label and the material names.
    """
    if not materials:
        raise MaterialError("material list is empty")
    dim = embeddings.dimension if embeddings is not None else EMBED_DIM

    def resolve(name: str) -> np.ndarray:
        if embeddings is not None:
            vec = embeddings.get(name)
            if vec is not None:
                return vec
        return fallback_embed(name, dim)

    e0 = resolve(label)
    weights = np.array(
        [max(0.0, cosine_similarity(e0, resolve(m.name))) for m in materials]
    )
    total = weights.sum()
    if total <= 0.0:
        probabilities = np.full(len(materials), 1.0 / len(materials))
    else:
        probabilities = weights / total
    return AssignmentDistribution(
        label=label,
        material_names=[m.name for m in materials],
        weights=weights,
        probabilities=probabilities,
    )


def sample_assignment(dist: AssignmentDistribution, rng_seed: int) -> int:
    """Draw a material index by inverse CDF with a seeded generator."""
    rng = np.random.default_rng(rng_seed)
    u = rng.random()
    cdf = np.cumsum(dist.probabilities)
    idx = int(np.searchsorted(cdf, u, side="right"))
    idx = min(idx, len(cdf) - 1)
    # never land on a zero-probability tail entry
    while dist.probabilities[idx] == 0.0 and idx > 0:
        idx -= 1
    dist.chosen = idx
    return idx


# ---------------------------------------------------------------------------
# Scattering prior
# ---------------------------------------------------------------------------


@dataclass
class ScatteringPrior:
    """Per-band normal distribution over scattering coefficients."""

    mean: np.ndarray
    std: np.ndarray

    def __post_init__(self) -> None:
        self.mean = np.broadcast_to(
            np.asarray(self.mean, dtype=np.float64), (N_BANDS,)
        ).copy()
        self.std = np.broadcast_to(
            np.asarray(self.std, dtype=np.float64), (N_BANDS,)
        ).copy()
        if np.any(self.std < 0):
            raise MaterialError("scattering prior std must be >= 0")

    @classmethod
    def default(cls) -> "ScatteringPrior":
        return cls(mean=np.full(N_BANDS, 0.3), std=np.full(N_BANDS, 0.15))


def sample_scattering(prior: ScatteringPrior, rng_seed: int) -> np.ndarray:
    """Per-band normal draw clamped to [0, 1]; low bands capped at 0.05."""
    rng = np.random.default_rng(rng_seed)
    values = prior.mean + prior.std * rng.standard_normal(N_BANDS)
    values = np.clip(values, 0.0, 1.0)
    values[:LOW_BAND_COUNT] = np.minimum(values[:LOW_BAND_COUNT], LOW_BAND_SCATTER_CAP)
    return values
