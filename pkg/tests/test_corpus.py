import json

import numpy as np
import pytest

from revfield.corpus import (
    ParseError,
    SyntheticConfig,
    TokenizerOptions,
    VersionedDocument,
    Vocabulary,
    export_json_lines,
    ingest,
    ingest_directory,
    ingest_json_lines,
    inject_undo_events,
    paper_fig1_config,
    segment_lengths,
    synthesize,
    tokenize,
)
from revfield.stemming import porter_stem


def small_doc(**kw):
    return VersionedDocument(
        revisions=[[1, 2, 1], [2, 2, 1]],
        vocabulary=Vocabulary(("aa", "ab")),
        **kw,
    )


# --- tokenizer -----------------------------------------------------------


def test_tokenize_lowercases_and_splits_on_non_alpha():
    opts = TokenizerOptions(remove_stopwords=False, stem=False)
    assert tokenize("Hello, WORLD!  x2y", opts) == ["hello", "world", "x", "y"]


def test_tokenize_removes_stopwords():
    opts = TokenizerOptions(stem=False)
    assert tokenize("the cat and the hat", opts) == ["cat", "hat"]


def test_tokenize_strips_html_spans():
    opts = TokenizerOptions(strip_html=True, remove_stopwords=False, stem=False)
    assert tokenize("<b>bold</b> move", opts) == ["bold", "move"]
    # without the flag, tag names survive as tokens
    assert tokenize("<b>bold</b>", TokenizerOptions(remove_stopwords=False, stem=False)) == [
        "b",
        "bold",
        "b",
    ]


def test_tokenize_pretokenized_passthrough():
    opts = TokenizerOptions(pretokenized=True)
    assert tokenize("Keep THESE exactly", opts) == ["Keep", "THESE", "exactly"]


def test_tokenize_empty_and_symbolic_input():
    assert tokenize("") == []
    assert tokenize("123 ... !!!") == []


# full-pipeline outputs, checked by hand against the published algorithm
STEM_VECTORS = [
    ("caresses", "caress"),
    ("ponies", "poni"),
    ("ties", "ti"),
    ("caress", "caress"),
    ("cats", "cat"),
    ("feed", "feed"),
    ("agreed", "agre"),
    ("plastered", "plaster"),
    ("motoring", "motor"),
    ("sing", "sing"),
    ("conflated", "conflat"),
    ("troubled", "troubl"),
    ("sized", "size"),
    ("hopping", "hop"),
    ("falling", "fall"),
    ("hissing", "hiss"),
    ("failing", "fail"),
    ("filing", "file"),
    ("happy", "happi"),
    ("sky", "sky"),
    ("relational", "relat"),
    ("rational", "ration"),
    ("electrical", "electr"),
    ("times", "time"),
    ("running", "run"),
    ("generalizations", "gener"),
]


@pytest.mark.parametrize("word,expected", STEM_VECTORS)
def test_porter_stem_vectors(word, expected):
    assert porter_stem(word) == expected


# --- vocabulary and document ----------------------------------------------


def test_vocabulary_ids_are_one_based():
    v = Vocabulary(("alpha", "beta"))
    assert v.id_of("alpha") == 1
    assert v.word_of(2) == "beta"
    assert len(v) == 2


def test_vocabulary_rejects_duplicates():
    with pytest.raises(ValueError):
        Vocabulary(("x", "x"))


def test_vocabulary_hash_is_stable_hex():
    a = Vocabulary(("x", "y")).sha256()
    assert a == Vocabulary(("x", "y")).sha256()
    assert a != Vocabulary(("y", "x")).sha256()
    int(a, 16)
    assert len(a) == 64


def test_document_rejects_out_of_range_token():
    with pytest.raises(ValueError):
        VersionedDocument([[1, 3]], Vocabulary(("aa", "ab")))
    with pytest.raises(ValueError):
        VersionedDocument([[0]], Vocabulary(("aa",)))


def test_document_rejects_bad_boundaries():
    with pytest.raises(ValueError):
        small_doc(boundaries=[[2, 1], []])  # not increasing
    with pytest.raises(ValueError):
        small_doc(boundaries=[[4], []])  # outside [0, n]
    with pytest.raises(ValueError):
        small_doc(boundaries=[[1]])  # wrong length


def test_document_rejects_mismatched_annotation_lengths():
    with pytest.raises(ValueError):
        small_doc(undo_flags=[False])
    with pytest.raises(ValueError):
        VersionedDocument([], Vocabulary(("aa",)))


def test_term_frequencies_sum_to_one():
    doc = small_doc()
    tf = doc.term_frequencies(0)
    assert tf.shape == (2,)
    assert tf[0] == pytest.approx(2 / 3)
    assert tf.sum() == pytest.approx(1.0)


def test_content_hash_tracks_tokens_and_vocab():
    a = small_doc().content_hash()
    changed = VersionedDocument([[1, 2, 2], [2, 2, 1]], Vocabulary(("aa", "ab")))
    renamed = VersionedDocument([[1, 2, 1], [2, 2, 1]], Vocabulary(("aa", "zz")))
    assert a != changed.content_hash()
    assert a != renamed.content_hash()
    assert a == small_doc().content_hash()


# --- ingestion ------------------------------------------------------------


def test_ingest_json_lines_basic(tmp_path):
    p = tmp_path / "c.jsonl"
    p.write_text(
        '{"text": "cats running", "boundaries": [1]}\n'
        '{"text": "cats sleeping", "undo": true}\n',
        encoding="utf-8",
    )
    doc = ingest_json_lines(p)
    assert doc.num_revisions == 2
    assert doc.vocabulary.words == ["cat", "run", "sleep"]
    assert doc.revisions == [[1, 2], [1, 3]]
    assert doc.boundaries == [[1], []]
    assert doc.undo_flags == [False, True]


def test_ingest_json_lines_errors(tmp_path):
    bad = tmp_path / "bad.jsonl"
    bad.write_text('{"text": "ok"}\nnot json\n', encoding="utf-8")
    with pytest.raises(ParseError, match="bad.jsonl:2"):
        ingest_json_lines(bad)

    no_text = tmp_path / "nt.jsonl"
    no_text.write_text('{"body": "x"}\n', encoding="utf-8")
    with pytest.raises(ParseError):
        ingest_json_lines(no_text)

    empty = tmp_path / "empty.jsonl"
    empty.write_text("\n\n", encoding="utf-8")
    with pytest.raises(ParseError):
        ingest_json_lines(empty)


def test_ingest_directory_orders_lexicographically(tmp_path):
    d = tmp_path / "revs"
    d.mkdir()
    (d / "b.txt").write_text("second cats", encoding="utf-8")
    (d / "a.txt").write_text("first cats", encoding="utf-8")
    (d / "annotations.json").write_text(
        json.dumps({"a.txt": {"author": "x"}}), encoding="utf-8"
    )
    doc = ingest_directory(d)
    assert doc.num_revisions == 2
    assert doc.vocabulary.word_of(doc.revisions[0][0]) == "first"
    assert doc.authors == ["x", None]


def test_ingest_dispatch(tmp_path):
    d = tmp_path / "revs"
    d.mkdir()
    (d / "0.txt").write_text("cats", encoding="utf-8")
    assert ingest(d).num_revisions == 1
    with pytest.raises(ValueError):
        ingest(d, fmt="parquet")


def test_export_ingest_round_trip(tmp_path):
    doc, _ = synthesize(SyntheticConfig(((0.4, 8.0, 1.0), (0.8, 6.0, 0.0)), 5, 4, 9))
    doc = inject_undo_events(doc, 0.3, 1)
    p = tmp_path / "rt.jsonl"
    export_json_lines(doc, p)
    back = ingest_json_lines(p)
    assert back.revisions == doc.revisions
    assert back.vocabulary == doc.vocabulary
    assert back.boundaries == doc.boundaries
    assert back.undo_flags == doc.undo_flags
    assert back.content_hash() == doc.content_hash()


def test_declared_vocabulary_is_enforced(tmp_path):
    p = tmp_path / "v.jsonl"
    p.write_text(
        '{"text": "aa zz", "pretokenized": true, "vocabulary": ["aa", "ab"]}\n',
        encoding="utf-8",
    )
    with pytest.raises(ParseError, match="not in declared vocabulary"):
        ingest_json_lines(p)


# --- synthesis ------------------------------------------------------------


def test_segment_lengths_round_half_up_and_floor():
    cfg = SyntheticConfig(((0.5, 3.0, 0.5), (0.5, 2.0, -1.0)), 8)
    assert segment_lengths(cfg, 0) == [3, 2]
    assert segment_lengths(cfg, 1) == [4, 1]  # 3.5 rounds up
    assert segment_lengths(cfg, 5) == [6, 0]  # floored at 0


def test_synthesize_shapes_and_boundaries():
    cfg = SyntheticConfig(((0.3, 10.0, 1.0), (0.9, 5.0, 0.0)), 4, 3, 2)
    doc, labels = synthesize(cfg)
    assert doc.num_revisions == 4
    for j in range(4):
        lens = segment_lengths(cfg, j)
        assert len(doc.revisions[j]) == sum(lens)
        assert len(labels[j]) == sum(lens)
        assert doc.boundaries[j] == [lens[0]]
        assert labels[j] == [0] * lens[0] + [1] * lens[1]
    assert all(1 <= t <= 3 for rev in doc.revisions for t in rev)


def test_synthesize_is_deterministic_per_seed():
    cfg = SyntheticConfig(((0.5, 20.0, 0.0),), 6, 2, 7)
    a, _ = synthesize(cfg)
    b, _ = synthesize(cfg)
    c, _ = synthesize(SyntheticConfig(((0.5, 20.0, 0.0),), 6, 2, 8))
    assert a.revisions == b.revisions
    assert a.revisions != c.revisions


def test_synthesize_segment_streams_are_independent():
    # changing one segment's probability must not disturb the other segment
    base = SyntheticConfig(((0.3, 30.0, 0.0), (0.5, 30.0, 0.0)), 5, 2, 3)
    bent = SyntheticConfig(((0.3, 30.0, 0.0), (0.95, 30.0, 0.0)), 5, 2, 3)
    a, _ = synthesize(base)
    b, _ = synthesize(bent)
    for j in range(5):
        assert a.revisions[j][:30] == b.revisions[j][:30]


def test_synthesize_token_rates_match_probabilities():
    cfg = SyntheticConfig(((0.25, 4000.0, 0.0), (0.75, 4000.0, 0.0)), 1, 2, 0)
    doc, labels = synthesize(cfg)
    toks = np.array(doc.revisions[0])
    labs = np.array(labels[0])
    for seg, p in ((0, 0.25), (1, 0.75)):
        rate = (toks[labs == seg] == 1).mean()
        assert abs(rate - p) < 0.03


def test_synthesize_vocab_survives_tokenization():
    doc, _ = synthesize(SyntheticConfig(((0.5, 5.0, 0.0),), 2, 12, 0))
    words = doc.vocabulary.words
    assert tokenize(" ".join(words)) == words


def test_paper_fig1_config_shape():
    cfg = paper_fig1_config(seed=5)
    assert cfg.num_versions == 60
    assert len(cfg.segment_params) == 3
    assert cfg.vocabulary_size == 2
    assert cfg.seed == 5
    probs = [p for p, _i, _g in cfg.segment_params]
    assert probs == [0.3, 0.7, 0.5]


def test_synthetic_config_validation():
    with pytest.raises(ValueError):
        SyntheticConfig(((1.5, 5.0, 0.0),), 3)
    with pytest.raises(ValueError):
        SyntheticConfig(((0.5, -1.0, 0.0),), 3)
    with pytest.raises(ValueError):
        SyntheticConfig(((0.5, 5.0, 0.0),), 0)


# --- undo injection ---------------------------------------------------------


def test_inject_undo_event_count_and_flags():
    doc, _ = synthesize(paper_fig1_config(seed=0))
    out = inject_undo_events(doc, 0.15, seed=4)
    assert sum(out.undo_flags) == round(0.15 * 60)
    assert out.num_revisions == doc.num_revisions
    assert out.undo_flags[0] is False


def test_inject_undo_scramble_and_revert_semantics():
    doc, _ = synthesize(paper_fig1_config(seed=1))
    out = inject_undo_events(doc, 0.1, seed=2)
    events = [t for t, fl in enumerate(out.undo_flags) if fl]
    assert events
    for t_revert in events:
        t = t_revert - 1
        # the reverting revision restores the pre-scramble state
        assert out.revisions[t_revert] == doc.revisions[t - 1]
        # the scrambled revision is a permutation of the original
        assert sorted(out.revisions[t]) == sorted(doc.revisions[t])
        assert out.revisions[t] != doc.revisions[t]
    # scrambles are pairwise non-adjacent
    scrambles = [t - 1 for t in events]
    assert all(b - a >= 2 for a, b in zip(scrambles, sorted(scrambles)[1:]))


def test_inject_undo_rate_zero_and_validation():
    doc = small_doc()
    out = inject_undo_events(doc, 0.0, seed=0)
    assert out.revisions == doc.revisions
    assert not any(out.undo_flags)
    with pytest.raises(ValueError):
        inject_undo_events(doc, 1.5, seed=0)
