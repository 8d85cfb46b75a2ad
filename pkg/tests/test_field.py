import math

import numpy as np
import pytest

from revfield.corpus import SyntheticConfig, VersionedDocument, Vocabulary, synthesize
from revfield.field import (
    KernelSpec,
    SpaceTimeField,
    build_field,
    default_kernel,
    kernel_weight,
)


def make_doc(revisions, vocab_size=None):
    v = vocab_size or max(t for r in revisions for t in r)
    words = [f"w{i}" for i in range(1, v + 1)]
    return VersionedDocument(revisions=revisions, vocabulary=Vocabulary(words))


def brute_force(doc, mode, S, T, kern):
    """Literal per-point double sum over every word of every revision."""
    lengths = doc.lengths()
    l = doc.num_revisions
    I = 1.0 if mode == "normalized" else float(max(lengths))
    J = float(l - 1)
    V = len(doc.vocabulary)
    ss, ts = np.linspace(0.0, I, S), np.linspace(0.0, J, T)
    out = np.zeros((S, T, V))
    for si, s in enumerate(ss):
        for ti, t in enumerate(ts):
            num, den = np.zeros(V), 0.0
            for j, rev in enumerate(doc.revisions):
                N = len(rev)
                for i, tok in enumerate(rev):
                    x = (i + 0.5) / N if mode == "normalized" else i + 0.5
                    wgt = 1.0 / N if mode == "normalized" else 1.0
                    k = kernel_weight(s - x, t - j, kern)
                    num[tok - 1] += wgt * k
                    den += wgt * k
            if mode == "normalized":
                if den > 0:
                    out[si, ti] = num / den
            else:
                zs = sum(kernel_weight(s - (i + 0.5), 0.0, kern) for i in range(int(I)))
                zt = sum(kernel_weight(0.0, t - j, kern) for j in range(l))
                if zs > 0 and zt > 0:
                    out[si, ti] = num / (zs * zt)
    return out


# --- kernel ----------------------------------------------------------------


def test_kernel_weight_center_and_scale():
    k = KernelSpec(0.5, 2.0)
    assert kernel_weight(0.0, 0.0, k) == 1.0
    assert kernel_weight(0.5, 0.0, k) == pytest.approx(math.exp(-0.5), abs=1e-15)
    assert kernel_weight(0.0, 2.0, k) == pytest.approx(math.exp(-0.5), abs=1e-15)


def test_kernel_weight_is_separable():
    k = KernelSpec(0.3, 1.5, 4.0)
    for dx, dy in ((0.1, 0.4), (-0.25, 2.0), (0.7, -3.3)):
        assert kernel_weight(dx, dy, k) == pytest.approx(
            kernel_weight(dx, 0.0, k) * kernel_weight(0.0, dy, k), rel=1e-14
        )


def test_kernel_truncation_is_exact_zero_strictly_beyond():
    # 2.0 * 0.25 is exact in binary, so the cutoff sits exactly at 0.5
    k = KernelSpec(0.25, 1.0, 2.0)
    assert kernel_weight(0.5, 0.0, k) > 0.0  # boundary included
    assert kernel_weight(np.nextafter(0.5, 1.0), 0.0, k) == 0.0
    assert kernel_weight(0.0, np.nextafter(2.0, 3.0), k) == 0.0
    assert kernel_weight(0.51, 2.01, k) == 0.0


def test_kernel_spec_validation():
    with pytest.raises(ValueError):
        KernelSpec(0.0, 1.0)
    with pytest.raises(ValueError):
        KernelSpec(1.0, -2.0)
    with pytest.raises(ValueError):
        KernelSpec(1.0, 1.0, 0.0)
    KernelSpec(1.0, 1.0, math.inf)  # untruncated is allowed


def test_default_kernel_scales_with_spatial_extent():
    k = default_kernel(1.0)
    assert (k.h_s, k.h_t, k.truncation_radius) == (0.02, 2.0, 3.0)
    assert default_kernel(250.0).h_s == pytest.approx(5.0)


# --- build_field -------------------------------------------------------------


def test_build_field_defaults_grid_to_256_by_revisions():
    doc = make_doc([[1, 2]] * 4)
    f = build_field(doc, kernel=KernelSpec(0.3, 2.0))
    assert (f.grid_s, f.grid_t) == (256, 4)
    assert f.extent == (1.0, 3.0)
    assert f.mode == "normalized"


def test_build_field_rejects_unknown_mode():
    with pytest.raises(ValueError, match="mode"):
        build_field(make_doc([[1]]), mode="sideways")


def test_build_field_rejects_zero_length_revision_in_normalized_mode():
    doc = VersionedDocument([[1], []], Vocabulary(("w1",)))
    with pytest.raises(ValueError, match="cannot normalize zero-length revision"):
        build_field(doc)


def test_non_normalized_mode_accepts_zero_length_revision():
    doc = VersionedDocument([[1, 1], []], Vocabulary(("w1",)))
    f = build_field(doc, mode="non-normalized", grid=(8, 2), kernel=KernelSpec(1.0, 1.0))
    assert f.extent[0] == 2.0
    assert np.all(f.mass >= 0.0)


def test_build_field_reports_uncovered_grid():
    # 3 tokens with a tiny bandwidth cannot reach every one of 64 samples
    doc = make_doc([[1, 2, 1]])
    with pytest.raises(ValueError, match="kernel support"):
        build_field(doc, grid=(64, 1), kernel=KernelSpec(0.01, 1.0))


def test_normalized_mode_is_a_simplex_everywhere():
    doc, _ = synthesize(SyntheticConfig(((0.3, 25.0, 1.0), (0.8, 30.0, 0.0)), 8, 3, 5))
    f = build_field(doc, grid=(48, 8))
    dense = f.data.toarray()
    assert dense.min() >= 0.0
    assert np.abs(dense.sum(axis=1) - 1.0).max() < 1e-12
    assert np.abs(f.mass - 1.0).max() < 1e-12


def test_non_normalized_mass_stays_within_unit_interval():
    doc, _ = synthesize(SyntheticConfig(((0.5, 20.0, -2.0),), 6, 2, 1))
    f = build_field(doc, mode="non-normalized", grid=(40, 6), kernel=KernelSpec(2.0, 1.5))
    assert f.mass.min() >= 0.0
    assert f.mass.max() <= 1.0 + 1e-12
    # rows shorter than the longest one leave a mass deficit near the padding
    assert f.mass.min() < 0.999


@pytest.mark.parametrize("mode", ["normalized", "non-normalized"])
def test_matches_brute_force_oracle(mode):
    rng = np.random.Generator(np.random.PCG64(42))
    revisions = [
        [int(x) for x in rng.integers(1, 4, size=int(rng.integers(2, 12)))]
        for _ in range(4)
    ]
    doc = make_doc(revisions, vocab_size=3)
    kern = KernelSpec(0.2 if mode == "normalized" else 2.0, 1.2, 3.0)
    f = build_field(doc, mode=mode, grid=(9, 6), kernel=kern)
    expected = brute_force(doc, mode, 9, 6, kern)
    got = np.stack([f.component(tok) for tok in (1, 2, 3)], axis=2)
    assert np.abs(got - expected).max() < 1e-12


def test_single_word_document_is_a_point_mass():
    doc = VersionedDocument([[1, 1, 1]], Vocabulary(("w1",)))
    f = build_field(doc, grid=(16, 1), kernel=KernelSpec(0.4, 1.0))
    assert np.abs(f.component(1) - 1.0).max() < 1e-12


def test_truncation_gives_locality():
    """Editing tokens beyond the truncation radius leaves a point untouched."""
    base = [1] * 40
    edited = [1] * 30 + [2] * 10
    kern = KernelSpec(0.05, 1.0, 3.0)
    fa = build_field(make_doc([base], vocab_size=2), grid=(41, 1), kernel=kern)
    fb = build_field(make_doc([edited], vocab_size=2), grid=(41, 1), kernel=kern)
    # grid point s=0.25 is 0.5 away from the edited region, 10 bandwidths
    s_idx = 10
    assert fa.s_coords[s_idx] == pytest.approx(0.25)
    assert fa.evaluate(s_idx, 0) == fb.evaluate(s_idx, 0)


def test_vocabulary_permutation_equivariance():
    rng = np.random.Generator(np.random.PCG64(7))
    revisions = [[int(x) for x in rng.integers(1, 5, size=15)] for _ in range(3)]
    doc = make_doc(revisions, vocab_size=4)
    perm = [3, 1, 4, 2]  # new id of old id i is perm[i-1]
    permuted = VersionedDocument(
        [[perm[t - 1] for t in rev] for rev in revisions],
        Vocabulary([f"p{i}" for i in range(1, 5)]),
    )
    kern = KernelSpec(0.3, 1.5)
    fa = build_field(doc, grid=(10, 3), kernel=kern)
    fb = build_field(permuted, grid=(10, 3), kernel=kern)
    for old in range(1, 5):
        assert np.array_equal(fa.component(old), fb.component(perm[old - 1]))


def test_evaluate_returns_sparse_distribution_dict():
    doc = make_doc([[1, 2], [2, 2]])
    f = build_field(doc, grid=(5, 2), kernel=KernelSpec(0.5, 1.0))
    dist = f.evaluate(0, 0)
    assert set(dist) <= {1, 2}
    assert sum(dist.values()) == pytest.approx(1.0)
    assert dist[1] == pytest.approx(f.component(1)[0, 0])


def test_index_range_checks():
    doc = make_doc([[1, 2]])
    f = build_field(doc, grid=(4, 1), kernel=KernelSpec(0.5, 1.0))
    with pytest.raises(IndexError):
        f.evaluate(4, 0)
    with pytest.raises(IndexError):
        f.evaluate(0, -1)
    with pytest.raises(IndexError):
        f.component(3)
    with pytest.raises(IndexError):
        f.row_index(0, 1)


def test_row_index_is_time_major():
    doc = make_doc([[1, 2]] * 3)
    f = build_field(doc, grid=(6, 3), kernel=KernelSpec(0.5, 1.0))
    assert f.row_index(0, 0) == 0
    assert f.row_index(5, 0) == 5
    assert f.row_index(0, 1) == 6
    assert f.row_index(2, 2) == 14


def test_json_round_trip_is_bit_exact(tmp_path):
    doc, _ = synthesize(SyntheticConfig(((0.4, 10.0, 0.5),), 4, 3, 3))
    f = build_field(doc, grid=(12, 4))
    p = tmp_path / "field.json"
    f.to_json(p)
    g = SpaceTimeField.from_json(p)
    assert (g.grid_s, g.grid_t) == (f.grid_s, f.grid_t)
    assert g.mode == f.mode
    assert g.extent == f.extent
    assert g.vocabulary_size == f.vocabulary_size
    assert g.vocabulary_sha256 == f.vocabulary_sha256
    assert (g.kernel.h_s, g.kernel.h_t, g.kernel.truncation_radius) == (
        f.kernel.h_s,
        f.kernel.h_t,
        f.kernel.truncation_radius,
    )
    a, b = f.data.tocoo(), g.data.tocoo()
    assert np.array_equal(a.row, b.row)
    assert np.array_equal(a.col, b.col)
    assert np.array_equal(a.data, b.data)  # exact, not approximate


def test_from_json_rejects_foreign_payload(tmp_path):
    p = tmp_path / "x.json"
    p.write_text('{"format": "something-else"}', encoding="utf-8")
    with pytest.raises(ValueError):
        SpaceTimeField.from_json(p)


def test_single_revision_rows_are_identical():
    doc = make_doc([[1, 2, 1, 1, 2]])
    f = build_field(doc, grid=(32, 4), kernel=KernelSpec(0.2, 2.0))
    dense = f.data.toarray().reshape(4, 32, -1)
    for t in range(1, 4):
        assert np.array_equal(dense[t], dense[0])


def test_large_bandwidth_limit_is_mean_of_revision_frequencies():
    doc, _ = synthesize(SyntheticConfig(((0.4, 20.0, 1.0),), 6, 3, 0))
    f = build_field(doc, grid=(16, 6), kernel=KernelSpec(1e4, 1e4, math.inf))
    tf = np.zeros(len(doc.vocabulary))
    for rev in doc.revisions:
        for tok in rev:
            tf[tok - 1] += 1.0 / len(rev)
    tf /= doc.num_revisions
    assert np.abs(f.data.toarray() - tf).max() < 1e-6


def test_adjacent_swap_moves_field_only_slightly():
    """Local word swaps perturb the field well below its own scale."""
    rng = np.random.Generator(np.random.PCG64(12))
    base = [int(x) for x in rng.integers(1, 3, size=60)]
    i = next(i for i in range(25, 59) if base[i] != base[i + 1])
    swapped = list(base)
    swapped[i], swapped[i + 1] = swapped[i + 1], swapped[i]
    assert base != swapped
    kern = KernelSpec(0.1, 1.0)
    fa = build_field(make_doc([base], vocab_size=2), grid=(64, 1), kernel=kern)
    fb = build_field(make_doc([swapped], vocab_size=2), grid=(64, 1), kernel=kern)
    diff = np.abs(fa.data.toarray() - fb.data.toarray()).max()
    spread = fa.data.toarray().max() - fa.data.toarray().min()
    assert diff < 0.05 * spread
