"""Corpus evaluation metrics with resampling-friendly sentence statistics.

Each metric reduces a (hypothesis, reference) corpus to a per-sentence
sufficient-statistics matrix and computes the corpus score from the column
sums, so any row subset (e.g. a bootstrap resample) can be rescored without
touching the original strings:

    corpus score = score_from_stats(stats.sum(axis=0))

``bleu`` counts clipped n-gram matches (orders 1-4) over 13a tokens with
exponential smoothing of zero counts and the brevity penalty.  ``chrfpp``
averages per-order F2 scores of character n-grams (orders 1-6, whitespace
removed) and word n-grams (orders 1-2, edge punctuation split off).  ``ter``
counts block shifts plus word edits against the reference length.

The emitted signature strings state the fixed configuration; everything is
case-sensitive and single-reference.
"""

from collections import Counter
from dataclasses import dataclass, field
import string

import numpy as np

from natkit import __version__
from natkit.corpus import tokenize_13a

MY_LOG_FLOOR = -9999999999.0

SIG_BLEU = f"nrefs:1 | case:mixed | eff:no | tok:13a | smooth:exp | version:{__version__}"
SIG_CHRF = f"nrefs:1 | case:mixed | eff:yes | nc:6 | nw:2 | space:no | version:{__version__}"
SIG_TER = f"nrefs:1 | case:mixed | tok:tercom | norm:no | punct:yes | asian:no | version:{__version__}"

CHRF_CHAR_ORDER = 6
CHRF_WORD_ORDER = 2
CHRF_BETA = 2.0

TER_MAX_SHIFT_SIZE = 10
TER_MAX_SHIFT_DIST = 50

DEFAULT_BLEU_BUCKETS = (0, 10, 20, 30, 40, 50)


class MetricError(ValueError):
    """Invalid metric input (empty corpus, length mismatch, empty reference)."""


@dataclass(frozen=True)
class ScoreReport:
    metric: str
    value: float
    signature: str
    sentence_stats: np.ndarray = field(repr=False)

    @property
    def n_sentences(self) -> int:
        return int(self.sentence_stats.shape[0])

    def to_dict(self) -> dict:
        return {
            "metric": self.metric,
            "value": self.value,
            "signature": self.signature,
            "n_sentences": self.n_sentences,
        }

    def format_line(self) -> str:
        return f"{self.metric} = {self.value:.2f} ({self.signature})"


def _check_corpus(hyps, refs) -> None:
    if len(hyps) != len(refs):
        raise MetricError(f"corpus size mismatch: {len(hyps)} hypotheses, {len(refs)} references")
    if len(hyps) == 0:
        raise MetricError("empty corpus")


# ---------------------------------------------------------------------------
# BLEU
# ---------------------------------------------------------------------------

def _ngrams(tokens: list[str], n: int) -> Counter:
    return Counter(tuple(tokens[i:i + n]) for i in range(len(tokens) - n + 1))


def bleu_sentence_stats(hyp: str, ref: str) -> np.ndarray:
    """Columns: clipped correct counts (orders 1-4), totals (1-4), lengths."""
    h = tokenize_13a(hyp)
    r = tokenize_13a(ref)
    row = np.zeros(10)
    for n in range(1, 5):
        hn = _ngrams(h, n)
        rn = _ngrams(r, n)
        row[n - 1] = sum(min(c, rn[g]) for g, c in hn.items())
        row[4 + n - 1] = max(len(h) - n + 1, 0)
    row[8] = len(h)
    row[9] = len(r)
    return row


def _my_log(x: np.ndarray) -> np.ndarray:
    out = np.full_like(x, MY_LOG_FLOOR, dtype=float)
    pos = x > 0
    out[pos] = np.log(x[pos])
    return out


def bleu_score_from_stats(agg: np.ndarray) -> np.ndarray:
    """Corpus BLEU from summed stats; accepts one vector or a batch of rows."""
    agg = np.atleast_2d(np.asarray(agg, dtype=float))
    correct, total = agg[:, 0:4], agg[:, 4:8]
    sys_len, ref_len = agg[:, 8], agg[:, 9]

    precisions = np.zeros_like(correct)
    smooth = np.ones(agg.shape[0])
    for n in range(4):
        zero_hit = (correct[:, n] == 0) & (total[:, n] > 0)
        smooth = np.where(zero_hit, smooth * 2, smooth)
        with np.errstate(divide="ignore", invalid="ignore"):
            plain = 100.0 * correct[:, n] / total[:, n]
            smoothed = 100.0 / (smooth * total[:, n])
        precisions[:, n] = np.where(total[:, n] > 0, np.where(zero_hit, smoothed, plain), 0.0)

    log_avg = _my_log(precisions).mean(axis=1)
    with np.errstate(divide="ignore", invalid="ignore"):
        bp = np.where(
            sys_len < ref_len,
            np.where(sys_len > 0, np.exp(1.0 - ref_len / np.maximum(sys_len, 1e-300)), 0.0),
            1.0,
        )
    score = bp * np.exp(np.minimum(log_avg, 700.0))
    return score if score.shape[0] > 1 else score[0]


def bleu(hyps: list[str], refs: list[str]) -> ScoreReport:
    _check_corpus(hyps, refs)
    stats = np.stack([bleu_sentence_stats(h, r) for h, r in zip(hyps, refs)])
    value = float(bleu_score_from_stats(stats.sum(axis=0)))
    return ScoreReport("bleu", value, SIG_BLEU, stats)


# ---------------------------------------------------------------------------
# chrF++
# ---------------------------------------------------------------------------

def _chrf_words(sentence: str) -> list[str]:
    """Whitespace tokens with one edge punctuation mark split off, if any."""
    out = []
    for w in sentence.split():
        if len(w) > 1 and w[-1] in string.punctuation:
            out += [w[:-1], w[-1]]
        elif len(w) > 1 and w[0] in string.punctuation:
            out += [w[0], w[1:]]
        else:
            out.append(w)
    return out


def chrf_sentence_stats(hyp: str, ref: str) -> np.ndarray:
    """(hyp count, ref count, match) per order: 6 char orders then 2 word."""
    row = np.zeros(3 * (CHRF_CHAR_ORDER + CHRF_WORD_ORDER))
    h_chars = "".join(hyp.split())
    r_chars = "".join(ref.split())
    h_words = _chrf_words(hyp)
    r_words = _chrf_words(ref)
    for i in range(CHRF_CHAR_ORDER + CHRF_WORD_ORDER):
        if i < CHRF_CHAR_ORDER:
            n = i + 1
            hn = _ngrams(list(h_chars), n)
            rn = _ngrams(list(r_chars), n)
        else:
            n = i - CHRF_CHAR_ORDER + 1
            hn = _ngrams(h_words, n)
            rn = _ngrams(r_words, n)
        match = sum(min(c, rn[g]) for g, c in hn.items())
        row[3 * i:3 * i + 3] = (sum(hn.values()), sum(rn.values()), match)
    return row


def chrf_score_from_stats(agg: np.ndarray) -> np.ndarray:
    agg = np.atleast_2d(np.asarray(agg, dtype=float))
    b2 = CHRF_BETA * CHRF_BETA
    n_orders = CHRF_CHAR_ORDER + CHRF_WORD_ORDER
    f_sum = np.zeros(agg.shape[0])
    eff = np.zeros(agg.shape[0])
    for i in range(n_orders):
        n_hyp, n_ref, n_match = agg[:, 3 * i], agg[:, 3 * i + 1], agg[:, 3 * i + 2]
        active = (n_hyp > 0) & (n_ref > 0)
        with np.errstate(divide="ignore", invalid="ignore"):
            prec = np.where(active, n_match / np.maximum(n_hyp, 1), 0.0)
            rec = np.where(active, n_match / np.maximum(n_ref, 1), 0.0)
            denom = b2 * prec + rec
            f = np.where(denom > 0, (1 + b2) * prec * rec / np.maximum(denom, 1e-300), 0.0)
        f_sum += np.where(active, f, 0.0)
        eff += active
    score = np.where(eff > 0, 100.0 * f_sum / np.maximum(eff, 1), 0.0)
    return score if score.shape[0] > 1 else score[0]


def chrfpp(hyps: list[str], refs: list[str]) -> ScoreReport:
    _check_corpus(hyps, refs)
    stats = np.stack([chrf_sentence_stats(h, r) for h, r in zip(hyps, refs)])
    value = float(chrf_score_from_stats(stats.sum(axis=0)))
    return ScoreReport("chrf", value, SIG_CHRF, stats)


# ---------------------------------------------------------------------------
# TER
# ---------------------------------------------------------------------------

def tokenize_tercom(sentence: str) -> list[str]:
    """Case-kept, punctuation-kept, unnormalized: whitespace splitting only."""
    return sentence.split()


def levenshtein(a, b) -> int:
    """Unit-cost edit distance between two sequences (or strings)."""
    a, b = list(a), list(b)
    if len(a) < len(b):
        a, b = b, a
    prev = list(range(len(b) + 1))
    for i, x in enumerate(a, start=1):
        cur = [i]
        for j, y in enumerate(b, start=1):
            cur.append(min(prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (x != y)))
        prev = cur
    return prev[-1]


def _contiguous_in(piece: list[str], ref: list[str]) -> bool:
    n = len(piece)
    return any(ref[i:i + n] == piece for i in range(len(ref) - n + 1))


def _best_shift(hyp: list[str], ref: list[str], base: int):
    """Most-edit-reducing single block move; scan order breaks ties."""
    best = None
    best_delta = 0
    max_span = min(TER_MAX_SHIFT_SIZE, len(hyp))
    for start in range(len(hyp)):
        for span in range(1, max_span + 1):
            if start + span > len(hyp):
                break
            piece = hyp[start:start + span]
            if not _contiguous_in(piece, ref):
                continue
            rest = hyp[:start] + hyp[start + span:]
            for ins in range(len(rest) + 1):
                if ins == start or abs(ins - start) > TER_MAX_SHIFT_DIST:
                    continue
                cand = rest[:ins] + piece + rest[ins:]
                delta = base - levenshtein(cand, ref)
                if delta > best_delta:
                    best_delta = delta
                    best = cand
    return best, best_delta


def ter_sentence_edits(hyp_words: list[str], ref_words: list[str]) -> int:
    """Greedy shift search: apply the best block move while it saves >= 1 edit."""
    if not ref_words:
        raise MetricError("TER needs a non-empty reference sentence")
    current = list(hyp_words)
    dist = levenshtein(current, ref_words)
    shifts = 0
    while dist > 0:
        cand, delta = _best_shift(current, ref_words, dist)
        if cand is None or delta < 1:
            break
        current = cand
        dist -= delta
        shifts += 1
    return shifts + dist


def ter_sentence_stats(hyp: str, ref: str) -> np.ndarray:
    h = tokenize_tercom(hyp)
    r = tokenize_tercom(ref)
    return np.array([float(ter_sentence_edits(h, r)), float(len(r))])


def ter_score_from_stats(agg: np.ndarray) -> np.ndarray:
    agg = np.atleast_2d(np.asarray(agg, dtype=float))
    with np.errstate(divide="ignore", invalid="ignore"):
        score = np.where(agg[:, 1] > 0, 100.0 * agg[:, 0] / np.maximum(agg[:, 1], 1e-300), 0.0)
    return score if score.shape[0] > 1 else score[0]


def ter(hyps: list[str], refs: list[str]) -> ScoreReport:
    _check_corpus(hyps, refs)
    stats = np.stack([ter_sentence_stats(h, r) for h, r in zip(hyps, refs)])
    value = float(ter_score_from_stats(stats.sum(axis=0)))
    return ScoreReport("ter", value, SIG_TER, stats)


# ---------------------------------------------------------------------------
# Registry and bucketing
# ---------------------------------------------------------------------------

METRICS = {
    "bleu": bleu,
    "chrf": chrfpp,
    "ter": ter,
}

SCORERS_FROM_STATS = {
    "bleu": bleu_score_from_stats,
    "chrf": chrf_score_from_stats,
    "ter": ter_score_from_stats,
}


def lower_is_better(metric: str) -> bool:
    if metric not in METRICS:
        raise MetricError(f"unknown metric {metric!r}")
    return metric == "ter"


def bucketed_bleu(hyps, refs, edges=DEFAULT_BLEU_BUCKETS):
    """Corpus BLEU per reference-length bucket.

    ``edges`` are ascending lower bounds; the last bucket is open-ended.
    Returns (label, score or None, count) per bucket; empty buckets score None.
    """
    _check_corpus(hyps, refs)
    edges = list(edges)
    if edges != sorted(edges) or len(set(edges)) != len(edges):
        raise MetricError("bucket edges must be strictly ascending")
    bounds = edges + [None]
    lengths = [len(tokenize_13a(r)) for r in refs]
    out = []
    for lo, hi in zip(bounds[:-1], bounds[1:]):
        in_bucket = [i for i, n in enumerate(lengths) if n >= lo and (hi is None or n < hi)]
        label = f"[{lo},{hi})" if hi is not None else f"[{lo},inf)"
        if not in_bucket:
            out.append((label, None, 0))
            continue
        report = bleu([hyps[i] for i in in_bucket], [refs[i] for i in in_bucket])
        out.append((label, report.value, len(in_bucket)))
    return out
