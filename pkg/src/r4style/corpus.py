"""Corpus ingestion: segmentation, normalization, and record extraction.

A sentence with m sensorial words yields m records, one per occurrence,
each pairing the masked sentence with the one-hot target and the style
vector of the remaining tokens. Extraction is pure and per-sentence, so it
parallelizes trivially; sampling takes an explicit seed.

Records are serialized as JSON lines (one object per record) with a sidecar
metadata file carrying the vocabulary/lexicon hashes and dimensions.
"""

from __future__ import annotations

import json
import re
import unicodedata
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .lexicon import (
    CategoryLexicon,
    OneHotTarget,
    SensorialVocabulary,
    StyleVector,
    one_hot,
    style_vector,
)

MASK_TOKEN = "[MASK]"

_SENTENCE_BREAK = re.compile(r"(?<=[.!?])\s+")


class SampleSizeError(ValueError):
    """Requested sample size exceeds the record population."""


@dataclass(frozen=True)
class SensorialRecord:
    """One (sentence, sensorial-word occurrence) pair.

    ``masked_tokens`` equals ``tokens`` with the target position replaced by
    MASK_TOKEN and differs nowhere else.
    """

    sentence_id: int
    tokens: tuple[str, ...]
    target_position: int
    target: OneHotTarget
    style: StyleVector
    masked_tokens: tuple[str, ...]

    @property
    def target_word(self) -> str:
        return self.tokens[self.target_position]


def segment(text: str) -> list[str]:
    """Split text into sentences at ./!/? followed by whitespace."""
    text = text.strip()
    if not text:
        return []
    return [s for s in _SENTENCE_BREAK.split(text) if s.strip()]


@lru_cache(maxsize=None)
def _is_punct(ch: str) -> bool:
    return unicodedata.category(ch).startswith("P")


def normalize(sentence: str) -> list[str]:
    """Lowercase, strip all Unicode punctuation, split on whitespace.

    Digits are kept; they never collide with the alphabetic lexicon patterns.
    """
    cleaned = "".join(ch for ch in sentence.lower() if not _is_punct(ch))
    return cleaned.split()


def extract_records(
    sentences: Sequence[str],
    vocab: SensorialVocabulary,
    lex: CategoryLexicon,
    counters: dict | None = None,
) -> list[SensorialRecord]:
    """One record per sensorial-token occurrence across the sentences.

    Sentences without sensorial words produce nothing. Single-token
    sentences whose token is sensorial cannot carry a style vector and are
    skipped; pass ``counters`` to collect ``sentences``, ``records`` and
    ``skipped_single_token`` tallies.
    """
    records: list[SensorialRecord] = []
    skipped = 0
    for sid, sentence in enumerate(sentences):
        tokens = tuple(normalize(sentence))
        hits = [p for p, tok in enumerate(tokens) if tok in vocab]
        if not hits:
            continue
        if len(tokens) < 2:
            skipped += 1
            continue
        for pos in hits:
            masked = tokens[:pos] + (MASK_TOKEN,) + tokens[pos + 1 :]
            records.append(
                SensorialRecord(
                    sentence_id=sid,
                    tokens=tokens,
                    target_position=pos,
                    target=one_hot(tokens[pos], vocab),
                    style=style_vector(tokens, pos, lex),
                    masked_tokens=masked,
                )
            )
    if counters is not None:
        counters["sentences"] = counters.get("sentences", 0) + len(sentences)
        counters["records"] = counters.get("records", 0) + len(records)
        counters["skipped_single_token"] = (
            counters.get("skipped_single_token", 0) + skipped
        )
    return records


def sample_records(
    records: Sequence[SensorialRecord], size: int, seed: int
) -> list[SensorialRecord]:
    """Uniform sample without replacement, deterministic under the seed."""
    if size > len(records):
        raise SampleSizeError(
            f"sample size {size} exceeds population of {len(records)} records"
        )
    rng = np.random.default_rng(seed)
    idx = rng.choice(len(records), size=size, replace=False)
    return [records[i] for i in idx]


# ---------------------------------------------------------------------------
# document loading and record serialization
# ---------------------------------------------------------------------------


def iter_documents(path: str | Path) -> Iterable[str]:
    """Yield document texts from a plain-text file, a directory of them, or
    a JSON-lines file with a ``text`` field."""
    path = Path(path)
    if path.is_dir():
        for child in sorted(path.iterdir()):
            if child.is_file():
                yield child.read_text(encoding="utf-8")
        return
    if path.suffix == ".jsonl":
        with path.open("r", encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                if not line.strip():
                    continue
                obj = json.loads(line)
                if "text" not in obj:
                    raise ValueError(f"{path}:{lineno}: missing 'text' field")
                yield obj["text"]
        return
    yield path.read_text(encoding="utf-8")


def record_to_json(record: SensorialRecord) -> str:
    obj = {
        "sentence_id": record.sentence_id,
        "tokens": list(record.tokens),
        "target_position": record.target_position,
        "target_word": record.target_word,
        "style": [float(v) for v in record.style.values],
    }
    return json.dumps(obj, separators=(",", ":"), ensure_ascii=False)


def write_records(
    records: Sequence[SensorialRecord],
    path: str | Path,
    vocab: SensorialVocabulary,
    lex: CategoryLexicon,
    counters: dict | None = None,
) -> Path:
    """Write records as JSON lines plus a ``<path>.meta.json`` sidecar."""
    path = Path(path)
    with path.open("w", encoding="utf-8") as fh:
        for record in records:
            fh.write(record_to_json(record))
            fh.write("\n")
    meta = {
        "record_count": len(records),
        "m": lex.m,
        "n": vocab.size,
        "mask_token": MASK_TOKEN,
        "vocab_sha256": vocab.content_hash(),
        "lexicon_sha256": lex.content_hash(),
    }
    if counters:
        meta.update(
            {
                "sentences": counters.get("sentences", 0),
                "skipped_single_token": counters.get("skipped_single_token", 0),
            }
        )
    meta_path = metadata_path(path)
    meta_path.write_text(json.dumps(meta, sort_keys=True, indent=2) + "\n", encoding="utf-8")
    return meta_path


def metadata_path(records_path: str | Path) -> Path:
    return Path(str(records_path) + ".meta.json")


def read_records(path: str | Path, vocab: SensorialVocabulary) -> list[SensorialRecord]:
    """Rebuild full records from a JSON-lines file; needs the same vocabulary."""
    path = Path(path)
    records: list[SensorialRecord] = []
    with path.open("r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ValueError(f"{path}:{lineno}: bad record line: {exc}") from None
            tokens = tuple(obj["tokens"])
            pos = int(obj["target_position"])
            values = np.asarray(obj["style"], dtype=np.float64)
            masked = tokens[:pos] + (MASK_TOKEN,) + tokens[pos + 1 :]
            records.append(
                SensorialRecord(
                    sentence_id=int(obj["sentence_id"]),
                    tokens=tokens,
                    target_position=pos,
                    target=one_hot(obj["target_word"], vocab),
                    style=StyleVector(values=values, denom=len(tokens) - 1),
                    masked_tokens=masked,
                )
            )
    return records
