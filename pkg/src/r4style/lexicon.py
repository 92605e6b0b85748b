"""Sensorial vocabulary and category-lexicon featurization.

The vocabulary fixes the one-hot target space: an ordered list of unique
lowercase words, with the target word of a sentence encoded by its position.
The category lexicon maps tokens to named style categories through exact or
trailing-star prefix patterns; a sentence's style vector is, per category,
the proportion of its tokens (excluding the one target word) that match.

A token may belong to several categories; each membership contributes to its
own category count, with no renormalization. Only the current target word is
excluded from the denominator — other sensorial words in the sentence are
counted like any token. Everything here is immutable after load and safe to
share across threads.

Lexicon file format (UTF-8):
    category_name<TAB>pattern1,pattern2,...
Lines starting with ``#`` are comments. Patterns are lowercase words,
optionally with a single trailing ``*`` for prefix matching.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np


class DuplicateWordError(ValueError):
    """A vocabulary file repeats a word."""


class UnknownWordError(ValueError):
    """A word is not in the sensorial vocabulary."""


class LexiconParseError(ValueError):
    """A category-lexicon file line does not parse; message carries the line number."""


class DegenerateSentenceError(ValueError):
    """The sentence has no non-target tokens, so style proportions are undefined."""


@dataclass(frozen=True)
class SensorialVocabulary:
    """Ordered list of unique lowercase words; position defines the one-hot index."""

    words: tuple[str, ...]
    _index: dict[str, int] = field(repr=False)

    @property
    def size(self) -> int:
        return len(self.words)

    def __len__(self) -> int:
        return len(self.words)

    def __contains__(self, word: str) -> bool:
        return word in self._index

    def index(self, word: str) -> int:
        try:
            return self._index[word]
        except KeyError:
            raise UnknownWordError(f"word not in sensorial vocabulary: {word!r}") from None

    def content_hash(self) -> str:
        return hashlib.sha256("\n".join(self.words).encode("utf-8")).hexdigest()


@dataclass(frozen=True)
class Category:
    """One style category: a name plus exact and prefix patterns."""

    name: str
    exact: frozenset[str]
    prefixes: tuple[str, ...]

    def matches(self, token: str) -> bool:
        if token in self.exact:
            return True
        return any(token.startswith(p) for p in self.prefixes)


@dataclass(frozen=True)
class CategoryLexicon:
    """Ordered style categories. Categories may overlap on the same token."""

    categories: tuple[Category, ...]

    @property
    def m(self) -> int:
        return len(self.categories)

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(c.name for c in self.categories)

    def category_indices(self, token: str) -> tuple[int, ...]:
        """Indices of every category the token belongs to (possibly several)."""
        return tuple(i for i, c in enumerate(self.categories) if c.matches(token))

    def content_hash(self) -> str:
        lines = []
        for c in self.categories:
            pats = sorted(c.exact) + [p + "*" for p in c.prefixes]
            lines.append(c.name + "\t" + ",".join(pats))
        return hashlib.sha256("\n".join(lines).encode("utf-8")).hexdigest()


@dataclass(frozen=True)
class OneHotTarget:
    """Sparse one-hot vector: position ``index`` set in a length-``n`` space."""

    index: int
    n: int

    def dense(self) -> np.ndarray:
        y = np.zeros(self.n, dtype=np.float32)
        y[self.index] = 1.0
        return y


@dataclass(frozen=True)
class StyleVector:
    """Per-category proportions of the non-target tokens of one sentence.

    values[i] = (# non-target tokens matching category i) / denom, with
    denom = token count - 1. Entries lie in [0, 1] and entry * denom is an
    integer count.
    """

    values: np.ndarray
    denom: int

    def __post_init__(self):
        self.values.setflags(write=False)


def load_vocabulary(path: str | Path) -> SensorialVocabulary:
    """Load a one-word-per-line UTF-8 vocabulary file, preserving file order.

    Words are lowercased; blank lines are skipped. Duplicates (after
    lowercasing), embedded whitespace, and empty files are rejected.
    """
    path = Path(path)
    words: list[str] = []
    index: dict[str, int] = {}
    with path.open("r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            word = line.strip().lower()
            if not word:
                continue
            if any(ch.isspace() for ch in word):
                raise ValueError(
                    f"{path}:{lineno}: vocabulary entries are single words, got {word!r}"
                )
            if word in index:
                raise DuplicateWordError(f"{path}:{lineno}: duplicate word {word!r}")
            index[word] = len(words)
            words.append(word)
    if not words:
        raise ValueError(f"{path}: empty vocabulary file")
    return SensorialVocabulary(words=tuple(words), _index=index)


def _parse_pattern(raw: str, path: Path, lineno: int) -> tuple[str, bool]:
    pat = raw.strip().lower()
    if not pat:
        raise LexiconParseError(f"{path}:{lineno}: empty pattern")
    is_prefix = pat.endswith("*")
    stem = pat[:-1] if is_prefix else pat
    if not stem:
        raise LexiconParseError(f"{path}:{lineno}: bare '*' pattern is not allowed")
    if "*" in stem:
        raise LexiconParseError(
            f"{path}:{lineno}: only a single trailing '*' is supported, got {raw!r}"
        )
    return stem, is_prefix


def load_category_lexicon(path: str | Path) -> CategoryLexicon:
    """Load a tab-separated category lexicon file (format in module docstring)."""
    path = Path(path)
    categories: list[Category] = []
    seen: set[str] = set()
    with path.open("r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            stripped = line.strip()
            if not stripped or stripped.startswith("#"):
                continue
            if "\t" not in stripped:
                raise LexiconParseError(
                    f"{path}:{lineno}: expected 'name<TAB>patterns', got {stripped!r}"
                )
            name, _, rest = stripped.partition("\t")
            name = name.strip().lower()
            if not name:
                raise LexiconParseError(f"{path}:{lineno}: empty category name")
            if name in seen:
                raise LexiconParseError(f"{path}:{lineno}: duplicate category {name!r}")
            seen.add(name)
            exact: set[str] = set()
            prefixes: list[str] = []
            for raw in rest.split(","):
                stem, is_prefix = _parse_pattern(raw, path, lineno)
                if is_prefix:
                    prefixes.append(stem)
                else:
                    exact.add(stem)
            if not exact and not prefixes:
                raise LexiconParseError(f"{path}:{lineno}: category {name!r} has no patterns")
            categories.append(
                Category(name=name, exact=frozenset(exact), prefixes=tuple(prefixes))
            )
    if not categories:
        raise LexiconParseError(f"{path}: no categories found")
    return CategoryLexicon(categories=tuple(categories))


def one_hot(word: str, vocab: SensorialVocabulary) -> OneHotTarget:
    """One-hot target for a vocabulary word; raises UnknownWordError otherwise."""
    return OneHotTarget(index=vocab.index(word), n=vocab.size)


def style_vector(
    tokens: Sequence[str], target_index: int, lex: CategoryLexicon
) -> StyleVector:
    """Style proportions over the sentence tokens, excluding the target token.

    Only the token at ``target_index`` is excluded; every other token
    (sensorial or not) is counted against each category it matches. Tokens
    are assumed normalized (lowercase, punctuation-free).
    """
    if not 0 <= target_index < len(tokens):
        raise ValueError(f"target_index {target_index} out of range for {len(tokens)} tokens")
    denom = len(tokens) - 1
    if denom == 0:
        raise DegenerateSentenceError(
            "single-token sentence: no non-target tokens to compute style over"
        )
    counts = np.zeros(lex.m, dtype=np.float64)
    for pos, token in enumerate(tokens):
        if pos == target_index:
            continue
        for ci in lex.category_indices(token):
            counts[ci] += 1.0
    return StyleVector(values=counts / denom, denom=denom)
