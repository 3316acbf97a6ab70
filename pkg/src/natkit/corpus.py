"""Vocabularies, tokenization and synthetic parallel corpora.

Token ids are dense integers. The special tokens sit at the lowest ids, in a
fixed order, so every model in the package can rely on the same layout:

    0 <unk>   1 <blank>   2 <pad>   3 <bos>   4 <eos>

Sources and targets never contain <blank>; it exists only inside alignment
lattices. Corpus files are UTF-8, one sentence per line, LF terminated, and
parallel files align by line number.
"""

from __future__ import annotations

import re
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

UNK = "<unk>"
BLANK = "<blank>"
PAD = "<pad>"
BOS = "<bos>"
EOS = "<eos>"

SPECIALS = (UNK, BLANK, PAD, BOS, EOS)

UNK_ID = 0
BLANK_ID = 1
PAD_ID = 2
BOS_ID = 3
EOS_ID = 4


class CorpusError(ValueError):
    """Malformed corpus input (bad vocab file, misaligned parallel data)."""


@dataclass(frozen=True)
class Vocabulary:
    """Bidirectional token <-> id map with reserved special tokens.

    ``tokens[i]`` is the surface form of id ``i``; ids are dense. Construct
    via :func:`build_vocab`, :meth:`Vocabulary.from_tokens` or :func:`load_vocab`.
    """

    tokens: tuple[str, ...]
    specials: tuple[str, ...] = SPECIALS
    _index: dict[str, int] = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        if tuple(self.tokens[: len(self.specials)]) != tuple(self.specials):
            raise CorpusError(
                f"specials {self.specials!r} must occupy the lowest ids, "
                f"got {self.tokens[:len(self.specials)]!r}"
            )
        index = {}
        for i, tok in enumerate(self.tokens):
            if tok in index:
                raise CorpusError(f"duplicate token {tok!r} at ids {index[tok]} and {i}")
            index[tok] = i
        object.__setattr__(self, "_index", index)

    @classmethod
    def from_tokens(cls, content_tokens: Iterable[str], specials: Sequence[str] = SPECIALS) -> "Vocabulary":
        return cls(tokens=tuple(specials) + tuple(content_tokens), specials=tuple(specials))

    def __len__(self) -> int:
        return len(self.tokens)

    def __contains__(self, token: str) -> bool:
        return token in self._index

    @property
    def n_specials(self) -> int:
        return len(self.specials)

    @property
    def content_ids(self) -> range:
        """Ids of ordinary tokens (everything past the specials)."""
        return range(self.n_specials, len(self.tokens))

    def id_of(self, token: str) -> int:
        return self._index.get(token, UNK_ID)

    def token_of(self, idx: int) -> str:
        return self.tokens[idx]

    def encode(self, tokens: Iterable[str]) -> tuple[int, ...]:
        """Map surface tokens to ids; unknown tokens become <unk>."""
        return tuple(self._index.get(t, UNK_ID) for t in tokens)

    def decode(self, ids: Iterable[int]) -> tuple[str, ...]:
        return tuple(self.tokens[i] for i in ids)


@dataclass(frozen=True)
class TokenSeq:
    """An id sequence with its role in a parallel pair.

    Sources and targets must not contain the blank id; the blank belongs to
    alignment space only.
    """

    ids: tuple[int, ...]
    role: str = "target"  # "source" | "target" | "hypothesis"

    def __post_init__(self) -> None:
        if self.role not in ("source", "target", "hypothesis"):
            raise CorpusError(f"unknown role {self.role!r}")
        if BLANK_ID in self.ids:
            raise CorpusError(f"{self.role} sequence contains the blank id {BLANK_ID}")
        object.__setattr__(self, "ids", tuple(int(i) for i in self.ids))

    def __len__(self) -> int:
        return len(self.ids)


@dataclass(frozen=True)
class ParallelCorpus:
    """Aligned (source, target) pairs plus the provenance needed to rebuild them."""

    pairs: tuple[tuple[TokenSeq, TokenSeq], ...]
    name: str = ""
    seed: int | None = None
    modes: int | None = None

    def __len__(self) -> int:
        return len(self.pairs)

    def __iter__(self):
        return iter(self.pairs)

    def sources(self) -> list[TokenSeq]:
        return [s for s, _ in self.pairs]

    def targets(self) -> list[TokenSeq]:
        return [t for _, t in self.pairs]


# ---------------------------------------------------------------------------
# Tokenization
# ---------------------------------------------------------------------------

def tokenize_13a(text: str) -> list[str]:
    """Language-independent mteval-v13a tokenization.

    Unescapes the four XML entities, drops ``<skipped>`` spans and soft line
    breaks, then isolates punctuation with the classic rule set: symbols are
    always split, periods and commas are split unless they sit between digits,
    and a dash after a digit is split. Finally splits on whitespace.
    """
    norm = text
    norm = norm.replace("<skipped>", "")
    norm = norm.replace("-\n", "")
    norm = norm.replace("\n", " ")
    norm = norm.replace("&quot;", '"')
    norm = norm.replace("&amp;", "&")
    norm = norm.replace("&lt;", "<")
    norm = norm.replace("&gt;", ">")
    norm = f" {norm} "
    norm = re.sub(r"([\{-\~\[-\` -\&\(-\+\:-\@\/])", r" \1 ", norm)
    norm = re.sub(r"([^0-9])([\.,])", r"\1 \2 ", norm)
    norm = re.sub(r"([\.,])([^0-9])", r" \1 \2", norm)
    norm = re.sub(r"([0-9])(-)", r"\1 \2 ", norm)
    return norm.split()


def build_vocab(sentences: Iterable[Sequence[str]], specials: Sequence[str] = SPECIALS) -> Vocabulary:
    """Build a vocabulary from tokenized sentences.

    Content tokens are ordered by descending frequency, ties broken
    lexicographically, after the specials. A content token colliding with a
    special name is rejected.
    """
    if len(set(specials)) != len(tuple(specials)):
        raise CorpusError(f"duplicate special tokens in {specials!r}")
    counts: Counter[str] = Counter()
    for sent in sentences:
        counts.update(sent)
    for sp in specials:
        if sp in counts:
            raise CorpusError(f"corpus token {sp!r} collides with a special token")
    ordered = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))
    return Vocabulary.from_tokens([tok for tok, _ in ordered], specials=specials)


# ---------------------------------------------------------------------------
# Synthetic parallel task
# ---------------------------------------------------------------------------

def synth_vocab(n_words: int, specials: Sequence[str] = SPECIALS) -> Vocabulary:
    """Vocabulary of ``n_words`` synthetic word types w00, w01, ..."""
    width = max(2, len(str(max(n_words - 1, 0))))
    return Vocabulary.from_tokens([f"w{i:0{width}d}" for i in range(n_words)], specials=specials)


def _apply_mode(src_ids: Sequence[int], mode: int, lo: int, n_content: int) -> tuple[int, ...]:
    """One deterministic source->target mapping.

    Mode k shifts content ids by (k + 1) modulo the content range and reverses
    the sequence for odd k; one extra token is appended so |target| equals
    |source| + 1.  The appended token is the image of the source endpoint
    farthest from the end of the (possibly reversed) body, so a trailing
    repeat happens only when the two source endpoints coincide.
    """
    shift = mode + 1

    def f(i: int) -> int:
        return lo + ((i - lo + shift) % n_content)

    body = [f(i) for i in src_ids]
    if mode % 2 == 1:
        body = body[::-1]
        body.append(f(src_ids[-1]))
    else:
        body.append(f(src_ids[0]))
    return tuple(body)


def synth_task(
    n_pairs: int,
    src_len_range: tuple[int, int],
    modes: int,
    seed: int,
    vocab: Vocabulary | None = None,
    n_words: int = 20,
) -> ParallelCorpus:
    """Generate an aligned synthetic corpus with a controlled number of modes.

    With ``modes=1`` the target is a pure function of the source (a cyclic
    shift of the content ids plus one appended token), so the task is
    deterministic. With ``modes>=2`` each pair picks one of several injective
    mappings uniformly at random, making the raw data multimodal: the same
    source string admits several valid targets.
    """
    if modes < 1:
        raise CorpusError(f"modes must be >= 1, got {modes}")
    lo_len, hi_len = src_len_range
    if lo_len < 1 or hi_len < lo_len:
        raise CorpusError(f"bad source length range {src_len_range!r}")
    if vocab is None:
        vocab = synth_vocab(n_words)
    lo = vocab.n_specials
    n_content = len(vocab) - lo
    if n_content < 2:
        raise CorpusError("need at least 2 content tokens")

    rng = np.random.default_rng(seed)
    pairs = []
    for _ in range(n_pairs):
        j = int(rng.integers(lo_len, hi_len + 1))
        src = tuple(int(x) for x in rng.integers(lo, lo + n_content, size=j))
        mode = int(rng.integers(0, modes)) if modes > 1 else 0
        tgt = _apply_mode(src, mode, lo, n_content)
        pairs.append((TokenSeq(src, "source"), TokenSeq(tgt, "target")))
    return ParallelCorpus(tuple(pairs), name=f"synth-m{modes}", seed=seed, modes=modes)


# ---------------------------------------------------------------------------
# File formats
# ---------------------------------------------------------------------------

def read_lines(path: str | Path) -> list[str]:
    """Read a one-sentence-per-line UTF-8 text file."""
    text = Path(path).read_text(encoding="utf-8")
    if text.endswith("\n"):
        text = text[:-1]
    return text.split("\n") if text else []

def write_lines(path: str | Path, lines: Iterable[str]) -> None:
    """Write sentences one per line, LF terminated."""
    body = "".join(f"{line}\n" for line in lines)
    Path(path).write_text(body, encoding="utf-8")


def save_vocab(path: str | Path, vocab: Vocabulary) -> None:
    """One token per line, line number = id."""
    write_lines(path, vocab.tokens)


def load_vocab(path: str | Path, specials: Sequence[str] = SPECIALS) -> Vocabulary:
    lines = read_lines(path)
    if len(lines) < len(tuple(specials)):
        raise CorpusError(f"vocab file {path} is shorter than the special list")
    return Vocabulary(tokens=tuple(lines), specials=tuple(specials))


def detokenize(vocab: Vocabulary, ids: Iterable[int]) -> str:
    """Space-join the surface forms; inverse of whitespace tokenization."""
    return " ".join(vocab.decode(ids))


def write_parallel(
    corpus: ParallelCorpus,
    vocab: Vocabulary,
    src_path: str | Path,
    tgt_path: str | Path,
) -> None:
    write_lines(src_path, (detokenize(vocab, s.ids) for s, _ in corpus))
    write_lines(tgt_path, (detokenize(vocab, t.ids) for _, t in corpus))


def read_parallel(
    vocab: Vocabulary,
    src_path: str | Path,
    tgt_path: str | Path,
    name: str = "",
) -> ParallelCorpus:
    src_lines = read_lines(src_path)
    tgt_lines = read_lines(tgt_path)
    if len(src_lines) != len(tgt_lines):
        raise CorpusError(
            f"parallel files disagree: {src_path} has {len(src_lines)} lines, "
            f"{tgt_path} has {len(tgt_lines)}"
        )
    pairs = tuple(
        (
            TokenSeq(vocab.encode(s.split()), "source"),
            TokenSeq(vocab.encode(t.split()), "target"),
        )
        for s, t in zip(src_lines, tgt_lines)
    )
    return ParallelCorpus(pairs, name=name)
