"""Versioned-document ingestion, tokenization, and synthesis.

A versioned document is an ordered sequence of revisions, each a sequence
of 1-based token ids over a shared vocabulary, with optional per-revision
ground-truth annotations (section-boundary token offsets, undo flags,
author and timestamp strings).
"""

from __future__ import annotations

import itertools
import json
import math
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .stemming import porter_stem
from .stopwords import STOPWORDS

_ALPHA_RUN = re.compile(r"[a-z]+")
_HTML_TAG = re.compile(r"<[^>]*>")


class ParseError(ValueError):
    """Malformed ingestion source; message carries file/line context."""


@dataclass(frozen=True)
class TokenizerOptions:
    """Tokenization switches.

    strip_html drops <...> spans before run extraction (a convenience for
    raw wiki dumps, not an HTML parser).  pretokenized treats the input as
    whitespace-separated canonical tokens and skips the normalization
    pipeline entirely (used when re-reading files this package exported).
    """

    strip_html: bool = False
    remove_stopwords: bool = True
    stem: bool = True
    pretokenized: bool = False


DEFAULT_TOKENIZER = TokenizerOptions()


def tokenize(text: str, options: TokenizerOptions = DEFAULT_TOKENIZER) -> list[str]:
    """Lowercase, extract maximal ASCII-alphabetic runs, drop stopwords, stem.

    Deterministic; empty or fully non-alphabetic input yields [].
    """
    if options.pretokenized:
        return text.split()
    if options.strip_html:
        text = _HTML_TAG.sub(" ", text)
    tokens = _ALPHA_RUN.findall(text.lower())
    if options.remove_stopwords:
        tokens = [t for t in tokens if t not in STOPWORDS]
    if options.stem:
        tokens = [porter_stem(t) for t in tokens]
    return tokens


class Vocabulary:
    """Ordered distinct token strings with a reverse map to 1-based ids."""

    def __init__(self, words: Sequence[str]):
        self.words = list(words)
        self.index = {w: i + 1 for i, w in enumerate(self.words)}
        if len(self.index) != len(self.words):
            raise ValueError("duplicate words in vocabulary")

    def __len__(self) -> int:
        return len(self.words)

    def __eq__(self, other: object) -> bool:
        return isinstance(other, Vocabulary) and self.words == other.words

    def id_of(self, word: str) -> int:
        return self.index[word]

    def word_of(self, token_id: int) -> str:
        return self.words[token_id - 1]

    def sha256(self) -> str:
        import hashlib

        return hashlib.sha256("\n".join(self.words).encode("utf-8")).hexdigest()


@dataclass
class VersionedDocument:
    """Ordered revisions of token-id sequences plus vocabulary and annotations."""

    revisions: list[list[int]]
    vocabulary: Vocabulary
    boundaries: list[list[int]] | None = None  # per-revision token offsets
    undo_flags: list[bool] | None = None
    authors: list[str | None] | None = None
    timestamps: list[str | None] | None = None

    def __post_init__(self) -> None:
        if len(self.revisions) < 1:
            raise ValueError("no revisions")
        nv = len(self.vocabulary)
        for j, rev in enumerate(self.revisions):
            for t in rev:
                if not 1 <= t <= nv:
                    raise ValueError(f"revision {j}: token id {t} outside [1, {nv}]")
        if self.boundaries is not None:
            if len(self.boundaries) != len(self.revisions):
                raise ValueError("boundaries length != revision count")
            for j, offs in enumerate(self.boundaries):
                n = len(self.revisions[j])
                if any(b <= a for a, b in zip(offs, offs[1:])) or any(
                    not 0 <= o <= n for o in offs
                ):
                    raise ValueError(
                        f"revision {j}: boundary offsets must be strictly "
                        f"increasing and within [0, {n}]"
                    )
        for name in ("undo_flags", "authors", "timestamps"):
            val = getattr(self, name)
            if val is not None and len(val) != len(self.revisions):
                raise ValueError(f"{name} length != revision count")

    @property
    def num_revisions(self) -> int:
        return len(self.revisions)

    def lengths(self) -> list[int]:
        return [len(r) for r in self.revisions]

    def content_hash(self) -> str:
        """SHA-256 over vocabulary words and token ids; identifies the content."""
        import hashlib

        h = hashlib.sha256()
        h.update("\x1f".join(self.vocabulary.words).encode("utf-8"))
        for rev in self.revisions:
            h.update(b"\x1e")
            h.update(np.asarray(rev, dtype=np.int64).tobytes())
        return h.hexdigest()

    def term_frequencies(self, revision: int) -> np.ndarray:
        """Normalized token counts of one revision (length |V|, sums to 1)."""
        tf = np.zeros(len(self.vocabulary))
        rev = self.revisions[revision]
        for t in rev:
            tf[t - 1] += 1.0
        if rev:
            tf /= len(rev)
        return tf


# --- ingestion ---------------------------------------------------------


def _doc_from_texts(
    texts: list[str],
    metas: list[dict],
    options: TokenizerOptions,
    origin: str,
    vocabulary: list[str] | None = None,
) -> VersionedDocument:
    token_lists = [tokenize(t, options) for t in texts]
    if vocabulary is not None:
        vocab = Vocabulary(vocabulary)
        for j, toks in enumerate(token_lists):
            for t in toks:
                if t not in vocab.index:
                    raise ParseError(
                        f"{origin}: revision {j}: token {t!r} not in declared vocabulary"
                    )
    else:
        seen: dict[str, None] = {}
        for toks in token_lists:
            for t in toks:
                seen.setdefault(t)
        vocab = Vocabulary(list(seen))
    revisions = [[vocab.id_of(t) for t in toks] for toks in token_lists]

    def column(key, default=None):
        if not any(key in m for m in metas):
            return None
        return [m.get(key, default) for m in metas]

    boundaries = column("boundaries", [])
    undo = column("undo", False)
    try:
        return VersionedDocument(
            revisions,
            vocab,
            boundaries=boundaries,
            undo_flags=undo,
            authors=column("author"),
            timestamps=column("timestamp"),
        )
    except ValueError as exc:
        raise ParseError(f"{origin}: {exc}") from exc


def ingest_json_lines(
    path: str | Path, options: TokenizerOptions = DEFAULT_TOKENIZER
) -> VersionedDocument:
    """Read one JSON object per line: {"text": ..., "boundaries"?, "undo"?, ...}.

    The first record may carry "vocabulary" (ordered word list) and
    "pretokenized" (bool); both are written by export_json_lines so that a
    round trip preserves the vocabulary exactly, including unused words.
    """
    path = Path(path)
    texts: list[str] = []
    metas: list[dict] = []
    vocabulary = None
    for lineno, line in enumerate(path.read_text(encoding="utf-8").splitlines(), 1):
        if not line.strip():
            continue
        try:
            rec = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ParseError(f"{path}:{lineno}: invalid JSON ({exc.msg})") from exc
        if not isinstance(rec, dict) or "text" not in rec:
            raise ParseError(f"{path}:{lineno}: record must be an object with a 'text' field")
        if lineno == 1 or not texts:
            if rec.get("pretokenized"):
                options = TokenizerOptions(pretokenized=True)
            if "vocabulary" in rec:
                vocabulary = list(rec["vocabulary"])
        texts.append(rec["text"])
        metas.append(rec)
    if not texts:
        raise ParseError(f"{path}: no revisions")
    return _doc_from_texts(texts, metas, options, str(path), vocabulary)


def ingest_directory(
    path: str | Path, options: TokenizerOptions = DEFAULT_TOKENIZER
) -> VersionedDocument:
    """Read one revision per file, ordered by lexicographic filename.

    An optional sidecar annotations.json maps filenames to the same
    optional fields the JSON-lines format carries.
    """
    path = Path(path)
    files = sorted(
        p for p in path.iterdir() if p.is_file() and p.name != "annotations.json"
    )
    if not files:
        raise ParseError(f"{path}: no revisions")
    sidecar = {}
    ann_path = path / "annotations.json"
    if ann_path.exists():
        try:
            sidecar = json.loads(ann_path.read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise ParseError(f"{ann_path}: invalid JSON ({exc.msg})") from exc
    texts = [f.read_text(encoding="utf-8") for f in files]
    metas = [sidecar.get(f.name, {}) for f in files]
    return _doc_from_texts(texts, metas, options, str(path))


def ingest(
    source: str | Path,
    fmt: str = "auto",
    options: TokenizerOptions = DEFAULT_TOKENIZER,
) -> VersionedDocument:
    """Dispatch to the named format ("json-lines" | "revision-directory")."""
    source = Path(source)
    if fmt == "auto":
        fmt = "revision-directory" if source.is_dir() else "json-lines"
    if fmt in ("json-lines", "jsonl"):
        return ingest_json_lines(source, options)
    if fmt in ("revision-directory", "dir"):
        return ingest_directory(source, options)
    raise ValueError(f"unknown ingest format {fmt!r}")


def export_json_lines(doc: VersionedDocument, path: str | Path) -> None:
    """Write the canonical JSON-lines form; ingest of the output reproduces doc."""
    path = Path(path)
    lines = []
    for j, rev in enumerate(doc.revisions):
        rec: dict = {"text": " ".join(doc.vocabulary.word_of(t) for t in rev)}
        if j == 0:
            rec["pretokenized"] = True
            rec["vocabulary"] = doc.vocabulary.words
        if doc.boundaries is not None:
            rec["boundaries"] = doc.boundaries[j]
        if doc.undo_flags is not None:
            rec["undo"] = doc.undo_flags[j]
        if doc.authors is not None and doc.authors[j] is not None:
            rec["author"] = doc.authors[j]
        if doc.timestamps is not None and doc.timestamps[j] is not None:
            rec["timestamp"] = doc.timestamps[j]
        lines.append(json.dumps(rec, ensure_ascii=False))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


# --- synthesis ---------------------------------------------------------


@dataclass(frozen=True)
class SyntheticConfig:
    """Segmented Bernoulli-style corpus generator parameters.

    Each segment is (token-1 probability, initial length in words, growth
    in words per version).  Lengths are rounded half-up and floored at 0.
    With vocabulary_size > 2 the non-1 mass is spread uniformly over the
    remaining ids.
    """

    segment_params: tuple[tuple[float, float, float], ...]
    num_versions: int
    vocabulary_size: int = 2
    seed: int = 0

    def __post_init__(self) -> None:
        if self.num_versions < 1:
            raise ValueError("num_versions must be >= 1")
        if self.vocabulary_size < 1:
            raise ValueError("vocabulary_size must be >= 1")
        for p, init, _growth in self.segment_params:
            if not 0.0 <= p <= 1.0:
                raise ValueError("segment probability outside [0, 1]")
            if init < 0:
                raise ValueError("negative initial segment length")


def paper_fig1_config(seed: int = 0) -> SyntheticConfig:
    """Three-segment two-word corpus: p = (0.3, 0.7, 0.5), initial lengths
    (30, 40, 120), growth (+2, 0, -1) words/version, 60 versions."""
    return SyntheticConfig(
        segment_params=((0.3, 30.0, 2.0), (0.7, 40.0, 0.0), (0.5, 120.0, -1.0)),
        num_versions=60,
        vocabulary_size=2,
        seed=seed,
    )


def _code_words(count: int) -> list[str]:
    """Deterministic alphabetic code words that survive tokenization unchanged."""
    letters = "abcdefghijklmnopqrstuvwxyz"
    out: list[str] = []
    for length in itertools.count(2):
        for combo in itertools.product(letters, repeat=length):
            w = "".join(combo)
            if w in STOPWORDS or porter_stem(w) != w:
                continue
            out.append(w)
            if len(out) == count:
                return out
    raise AssertionError("unreachable")


def segment_lengths(config: SyntheticConfig, version: int) -> list[int]:
    """Per-segment word counts of one version (round half-up, floor at 0)."""
    return [
        max(0, int(math.floor(init + growth * version + 0.5)))
        for _p, init, growth in config.segment_params
    ]


def synthesize(config: SyntheticConfig) -> tuple[VersionedDocument, list[list[int]]]:
    """Generate a segmented synthetic corpus plus per-token segment labels.

    Revision j concatenates the segments in order; each segment's tokens
    are drawn i.i.d. from its own seeded stream, so two configs differing
    only in probabilities consume identical uniforms per (segment,
    version, position).  Returns (document, labels) where labels[j][i] is
    the 0-based segment id of token i in revision j.
    """
    num_segments = len(config.segment_params)
    streams = [
        np.random.Generator(np.random.PCG64(ss))
        for ss in np.random.SeedSequence(config.seed).spawn(max(num_segments, 1))
    ]
    V = config.vocabulary_size
    revisions: list[list[int]] = []
    labels: list[list[int]] = []
    boundaries: list[list[int]] = []
    for j in range(config.num_versions):
        lengths = segment_lengths(config, j)
        tokens: list[int] = []
        labs: list[int] = []
        for k, ((p, _i, _g), n) in enumerate(zip(config.segment_params, lengths)):
            u = streams[k].random(n)
            ids = np.full(n, 1, dtype=np.int64)
            rest = u >= p
            if V > 1:
                # map the residual uniform onto ids 2..V
                scaled = (u[rest] - p) / max(1.0 - p, np.finfo(float).tiny)
                ids[rest] = 2 + np.minimum((scaled * (V - 1)).astype(np.int64), V - 2)
            tokens.extend(int(t) for t in ids)
            labs.extend([k] * n)
        n_total = len(tokens)
        cuts = np.cumsum(lengths)[:-1]
        offs = sorted({int(c) for c in cuts if 0 < c < n_total})
        revisions.append(tokens)
        labels.append(labs)
        boundaries.append(offs)
    vocab = Vocabulary(_code_words(V))
    doc = VersionedDocument(revisions, vocab, boundaries=boundaries)
    return doc, labels


def inject_undo_events(
    doc: VersionedDocument, rate: float, seed: int
) -> VersionedDocument:
    """Scramble a fraction of revisions and revert each in the next revision.

    A scrambled revision j gets a random permutation of its own tokens
    (term frequencies unchanged, local distributions not); revision j+1 is
    replaced by the content of revision j-1 and flagged undo.  Events are
    non-adjacent so scramble/revert pairs never overlap.
    """
    if not 0.0 <= rate <= 1.0:
        raise ValueError("rate outside [0, 1]")
    l = doc.num_revisions
    rng = np.random.Generator(np.random.PCG64(seed))
    eligible = list(range(1, l - 1))
    target = int(round(rate * l))
    chosen: list[int] = []
    for idx in rng.permutation(len(eligible)):
        t = eligible[idx]
        if all(abs(t - c) >= 2 for c in chosen):
            chosen.append(t)
        if len(chosen) >= target:
            break
    chosen.sort()
    revisions = [list(r) for r in doc.revisions]
    undo = [False] * l
    for t in chosen:
        perm = rng.permutation(len(revisions[t]))
        revisions[t] = [revisions[t][i] for i in perm]
        revisions[t + 1] = list(doc.revisions[t - 1])
        undo[t + 1] = True
    return VersionedDocument(
        revisions,
        doc.vocabulary,
        boundaries=doc.boundaries,
        undo_flags=undo,
        authors=doc.authors,
        timestamps=doc.timestamps,
    )
