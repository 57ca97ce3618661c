"""Batch export of text embeddings for material names and scene labels.

Writes the JSON table consumed by the simulation pipeline's materials module:
{"dimension": D, "entries": {name: [floats]}} with L2-normalized vectors.

Models resolve either to a sentence-transformers checkpoint or to the
built-in offline ``hashed-trigram[:dim]`` encoder, which needs no downloads
and is deterministic by construction.
"""

from __future__ import annotations

import hashlib
import json
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np

DEFAULT_MODEL = "sentence-transformers/distiluse-base-multilingual-cased-v2"
HASHED_PREFIX = "hashed-trigram"

__all__ = [
    "DEFAULT_MODEL",
    "EmbeddingExportJob",
    "ExportError",
    "HashedTrigramEncoder",
    "export_embeddings",
    "resolve_model",
]


class ExportError(RuntimeError):
    pass


@dataclass
class EmbeddingExportJob:
    names_path: str | Path
    model: str = DEFAULT_MODEL
    output_path: str | Path = "embeddings.json"


class HashedTrigramEncoder:
    """Offline encoder: blake2b-hashed character trigrams over the padded,
    lowercased name, L2-normalized.  Shares only the file format with the
    pipeline's internal fallback embedder."""

    def __init__(self, dimension: int = 512):
        if dimension < 8:
            raise ExportError(f"embedding dimension too small: {dimension}")
        self.dimension = dimension

    def encode(self, names: list[str]) -> np.ndarray:
        out = np.zeros((len(names), self.dimension))
        for row, name in enumerate(names):
            padded = f" {name.lower().strip()} "
            for i in range(len(padded) - 2):
                gram = padded[i : i + 3]
                digest = hashlib.blake2b(gram.encode("utf-8"), digest_size=8).digest()
                out[row, int.from_bytes(digest, "little") % self.dimension] += 1.0
        return out


class SentenceTransformerEncoder:
    def __init__(self, model_id: str):
        try:
            from sentence_transformers import SentenceTransformer
        except ImportError as exc:
            raise ExportError(
                "sentence-transformers is not installed; use the "
                f"'{HASHED_PREFIX}' model or install the 'transformer' extra"
            ) from exc
        try:
            self._model = SentenceTransformer(model_id)
        except Exception as exc:  # noqa: BLE001 - anything here is a load failure
            raise ExportError(f"cannot load model {model_id!r}: {exc}") from exc
        self.dimension = int(self._model.get_sentence_embedding_dimension())

    def encode(self, names: list[str]) -> np.ndarray:
        return np.asarray(self._model.encode(names, show_progress_bar=False))


def resolve_model(model_id: str):
    """Model ids: 'hashed-trigram' or 'hashed-trigram:<dim>' select the
    offline encoder; anything else loads a sentence-transformers checkpoint."""
    if model_id == HASHED_PREFIX:
        return HashedTrigramEncoder()
    if model_id.startswith(HASHED_PREFIX + ":"):
        return HashedTrigramEncoder(int(model_id.split(":", 1)[1]))
    return SentenceTransformerEncoder(model_id)


def read_names(path: str | Path) -> list[str]:
    try:
        lines = Path(path).read_text().splitlines()
    except OSError as exc:
        raise ExportError(f"cannot read name list {path}: {exc}") from exc
    names = [line.strip() for line in lines if line.strip()]
    if not names:
        raise ExportError(f"{path}: no names after trimming")
    return names


def export_embeddings(job: EmbeddingExportJob) -> Path:
    """Encode every name and write the embedding table; duplicate names keep
    the last occurrence (with a warning).  Returns the output path."""
    names = read_names(job.names_path)
    seen = set()
    duplicates = [n for n in names if n in seen or seen.add(n)]
    if duplicates:
        warnings.warn(
            f"duplicate names (last occurrence wins): {sorted(set(duplicates))}",
            stacklevel=2,
        )
    encoder = resolve_model(job.model)
    vectors = encoder.encode(names)
    if vectors.shape != (len(names), encoder.dimension):
        raise ExportError(
            f"model returned shape {vectors.shape}, expected "
            f"({len(names)}, {encoder.dimension})"
        )
    norms = np.linalg.norm(vectors, axis=1, keepdims=True)
    norms[norms == 0] = 1.0
    vectors = vectors / norms

    entries = {name: vec for name, vec in zip(names, vectors)}
    payload = {
        "dimension": encoder.dimension,
        "entries": {name: [float(x) for x in vec] for name, vec in entries.items()},
    }
    out = Path(job.output_path)
    out.write_text(json.dumps(payload))
    return out
