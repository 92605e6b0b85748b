"""Batched extraction of the encoder hidden state at the mask position.

Each record's masked sentence is re-tokenized by the model's own subword
tokenizer, with the word-level mask mapped to the model's mask token. Row i
of the output matrix is the chosen layer's hidden state at that mask token
for record i, in file order. Sentences longer than the model limit are
truncated around the mask so the mask itself always survives; the manifest
counts how many records needed that.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np
import torch

from .records import MASK_TOKEN, MaskedRecord, read_masked_records
from .slmx import write_matrix


class ModelLoadError(RuntimeError):
    """The encoder checkpoint could not be loaded."""


class MaskAlignmentError(RuntimeError):
    """A record's mask token is absent after subword tokenization."""


@dataclass(frozen=True)
class ExportManifest:
    model: str
    hidden_size: int
    records: int
    records_sha256: str
    batch_size: int
    layer: int
    truncated: int

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True, indent=2) + "\n"


def manifest_path(out_path: str | Path) -> Path:
    return Path(str(out_path) + ".manifest.json")


def _load_encoder(model_id: str):
    from transformers import AutoModel, AutoTokenizer

    try:
        tokenizer = AutoTokenizer.from_pretrained(model_id)
        model = AutoModel.from_pretrained(model_id)
    except Exception as exc:
        raise ModelLoadError(f"cannot load encoder {model_id!r}: {exc}") from exc
    if tokenizer.mask_token_id is None:
        raise ModelLoadError(
            f"{model_id!r} has no mask token; a masked-language-model encoder is required"
        )
    return tokenizer, model


def _max_length(tokenizer, model) -> int:
    limit = getattr(tokenizer, "model_max_length", None)
    if limit is not None and limit < 1_000_000:
        return int(limit)
    return int(model.config.max_position_embeddings)


def _special_frame(tokenizer) -> tuple[list[int], list[int]]:
    """The special-token ids the tokenizer puts before/after a sequence,
    found by wrapping the (single-id) mask token and locating it."""
    wrapped = tokenizer.encode(tokenizer.mask_token, add_special_tokens=True)
    i = wrapped.index(tokenizer.mask_token_id)
    return wrapped[:i], wrapped[i + 1 :]


def _encode_record(record: MaskedRecord, tokenizer, frame, max_len: int):
    """Subword ids with specials, plus the mask's index. Returns (ids, pos, truncated)."""
    text = record.masked_text(tokenizer.mask_token)
    ids = tokenizer.encode(text, add_special_tokens=False)
    mask_id = tokenizer.mask_token_id
    if mask_id not in ids:
        raise MaskAlignmentError(
            f"record {record.index} (line {record.line_no}): mask token missing "
            f"after tokenization"
        )
    pos = ids.index(mask_id)
    prefix, suffix = frame
    budget = max_len - len(prefix) - len(suffix)
    truncated = len(ids) > budget
    if truncated:
        start = min(max(pos - budget // 2, 0), len(ids) - budget)
        ids = ids[start : start + budget]
    full = prefix + ids + suffix
    return full, full.index(mask_id), truncated


def export_embeddings(
    records_path: str | Path,
    model_id: str,
    out_path: str | Path,
    batch_size: int = 32,
    layer: int = -1,
    deterministic: bool = False,
) -> ExportManifest:
    """Run the encoder over a records file and write the k x d matrix.

    ``layer`` indexes the hidden-state stack: 0 is the embedding output,
    1..L the encoder layers, negative values count from the end (-1 is the
    final layer, the default).
    """
    if batch_size < 1:
        raise ValueError(f"batch_size must be >= 1, got {batch_size}")
    records = read_masked_records(records_path)
    tokenizer, model = _load_encoder(model_id)

    n_states = int(model.config.num_hidden_layers) + 1
    norm_layer = layer if layer >= 0 else n_states + layer
    if not 0 <= norm_layer < n_states:
        raise ValueError(
            f"layer {layer} out of range; model exposes {n_states} hidden states "
            f"(0..{n_states - 1})"
        )

    if deterministic:
        torch.manual_seed(0)
        torch.set_num_threads(1)
        torch.use_deterministic_algorithms(True)
    model.eval()

    max_len = _max_length(tokenizer, model)
    frame = _special_frame(tokenizer)
    encoded = [_encode_record(r, tokenizer, frame, max_len) for r in records]
    truncated = sum(1 for _, _, t in encoded if t)
    pad_id = tokenizer.pad_token_id if tokenizer.pad_token_id is not None else 0

    rows: list[np.ndarray] = []
    with torch.no_grad():
        for start in range(0, len(encoded), batch_size):
            chunk = encoded[start : start + batch_size]
            width = max(len(ids) for ids, _, _ in chunk)
            input_ids = torch.full((len(chunk), width), pad_id, dtype=torch.long)
            attention = torch.zeros((len(chunk), width), dtype=torch.long)
            for i, (ids, _, _) in enumerate(chunk):
                input_ids[i, : len(ids)] = torch.tensor(ids, dtype=torch.long)
                attention[i, : len(ids)] = 1
            states = model(
                input_ids=input_ids,
                attention_mask=attention,
                output_hidden_states=True,
            ).hidden_states[norm_layer]
            for i, (_, pos, _) in enumerate(chunk):
                rows.append(states[i, pos].numpy().astype(np.float32))

    matrix = np.stack(rows)
    write_matrix(matrix, out_path)
    manifest = ExportManifest(
        model=str(model_id),
        hidden_size=int(matrix.shape[1]),
        records=len(records),
        records_sha256=hashlib.sha256(Path(records_path).read_bytes()).hexdigest(),
        batch_size=int(batch_size),
        layer=int(layer),
        truncated=int(truncated),
    )
    manifest_path(out_path).write_text(manifest.to_json(), encoding="utf-8")
    return manifest
