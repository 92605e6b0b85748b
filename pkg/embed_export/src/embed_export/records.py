"""Reader for the JSON-lines sensorial-record format.

Each line is an object with ``sentence_id``, ``tokens`` (the original,
unmasked tokens), ``target_position``, ``target_word``, and ``style``. Only
the fields needed to rebuild the masked sentence are consumed here; style
vectors pass through untouched by this package.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

MASK_TOKEN = "[MASK]"


@dataclass(frozen=True)
class MaskedRecord:
    """One record, reduced to what the encoder needs."""

    index: int  # 0-based position in the file, defines the output row
    line_no: int
    sentence_id: int
    tokens: tuple[str, ...]
    target_position: int

    def masked_text(self, mask_token: str = MASK_TOKEN) -> str:
        parts = list(self.tokens)
        parts[self.target_position] = mask_token
        return " ".join(parts)


def read_masked_records(path: str | Path) -> list[MaskedRecord]:
    """Parse all records in file order; malformed lines fail with a line number."""
    p = Path(path)
    out: list[MaskedRecord] = []
    with p.open("r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ValueError(f"{p}:{line_no}: bad record line: {exc}") from None
            for key in ("sentence_id", "tokens", "target_position"):
                if key not in obj:
                    raise ValueError(f"{p}:{line_no}: missing field {key!r}")
            tokens = tuple(str(t) for t in obj["tokens"])
            pos = int(obj["target_position"])
            if not tokens:
                raise ValueError(f"{p}:{line_no}: empty token list")
            if not 0 <= pos < len(tokens):
                raise ValueError(
                    f"{p}:{line_no}: target_position {pos} out of range for "
                    f"{len(tokens)} tokens"
                )
            out.append(
                MaskedRecord(
                    index=len(out),
                    line_no=line_no,
                    sentence_id=int(obj["sentence_id"]),
                    tokens=tokens,
                    target_position=pos,
                )
            )
    if not out:
        raise ValueError(f"{p}: no records")
    return out
