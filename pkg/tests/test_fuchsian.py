"""Preset, holonomy, and length-spectrum tests.

Oracles: generator traces of the pants preset are 2*cosh(l/2) by
construction of the trace triple; the octagon relator must close up to the
sign of the lift; spectra are compared against exhaustive word enumeration
with every pruning rule disabled.
"""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from specvar import fuchsian as F
from specvar.words import (
    canonical_class,
    enumerate_classes,
    free_group,
    invert_word,
    surface_group,
    word_power,
)


@pytest.fixture(scope="module")
def pants():
    return F.preset("schottky_pants", 2, 2, 2)


@pytest.fixture(scope="module")
def octagon():
    return F.preset("octagon_genus2")


@pytest.fixture(scope="module")
def torus():
    return F.preset("punctured_torus")


@pytest.fixture(scope="module")
def octagon_spectrum6(octagon):
    return F.build_spectrum(octagon, 6.0)


@pytest.fixture(scope="module")
def pants_spectrum6(pants):
    return F.build_spectrum(pants, 6.0)


# ---------------------------------------------------------------------------
# presets


def test_pants_generator_traces(pants):
    for m in pants.generators:
        assert np.trace(m) == pytest.approx(2 * math.cosh(1.0), abs=1e-12)


def test_pants_third_boundary_trace():
    g = F.preset("schottky_pants", 1.4, 2.2, 3.1)
    x, y = g.generators
    assert abs(np.trace(x @ y)) == pytest.approx(2 * math.cosh(3.1 / 2), abs=1e-10)
    assert np.trace(x) == pytest.approx(2 * math.cosh(0.7), abs=1e-12)
    assert np.trace(y) == pytest.approx(2 * math.cosh(1.1), abs=1e-12)


def test_pants_rejects_nonpositive_lengths():
    with pytest.raises(F.InvalidParameters):
        F.preset("schottky_pants", 2, 0, 2)
    with pytest.raises(F.InvalidParameters):
        F.preset("schottky_pants", -1, 2, 2)


def test_unknown_preset_rejected():
    with pytest.raises(F.InvalidParameters):
        F.preset("flat_torus")


def test_generators_unimodular(pants, octagon, torus):
    for g in (pants, octagon, torus):
        for m in g.generators:
            assert np.linalg.det(m) == pytest.approx(1.0, abs=1e-12)


def test_octagon_relator_holonomy(octagon):
    rel = F.holonomy(octagon, octagon.group.relator)
    err = min(abs(rel - np.eye(2)).max(), abs(rel + np.eye(2)).max())
    assert err < 1e-10


def test_octagon_generators_hyperbolic(octagon):
    # side pairings of the regular octagon translate by 2*arccosh(1+1/sqrt(2))
    for m in octagon.generators:
        assert abs(np.trace(m)) == pytest.approx(2 + math.sqrt(2), abs=1e-10)


def test_octagon_no_elliptic_short_words(octagon):
    # discreteness probe: in a torsion-free Fuchsian group no nontrivial
    # element is elliptic, so every short word has |tr| >= 2
    group = octagon.group
    mats, inv = F._letter_matrices(octagon)
    words = np.arange(8, dtype=np.int8)[:, None]
    flat = mats.reshape(8, 4).copy()
    for _ in range(4):
        tr = np.abs(flat[:, 0] + flat[:, 3])
        assert (tr > 2 - 1e-9).all()
        words, flat = F._extend_shell(words, flat, mats, inv, None)
    tr = np.abs(flat[:, 0] + flat[:, 3])
    assert (tr > 2 - 1e-9).all()


def test_torus_commutator_parabolic(torus):
    x, y = torus.generators
    comm = x @ y @ np.linalg.inv(x) @ np.linalg.inv(y)
    assert np.trace(comm) == pytest.approx(-2.0, abs=1e-12)
    assert torus.warning is not None


# ---------------------------------------------------------------------------
# holonomy and length helpers


def test_holonomy_empty_word_is_identity(pants):
    assert np.allclose(F.holonomy(pants, ()), np.eye(2))


def test_holonomy_word_times_inverse(octagon):
    w = (1, 2, -3, 4, 4, -1)
    m = F.holonomy(octagon, w) @ F.holonomy(octagon, invert_word(w))
    assert abs(m - np.eye(2)).max() < 1e-10


@given(
    st.lists(st.sampled_from([1, -1, 2, -2]), min_size=1, max_size=6),
    st.lists(st.sampled_from([1, -1, 2, -2]), min_size=1, max_size=4),
)
@settings(max_examples=60, deadline=None)
def test_holonomy_trace_conjugation_invariant(w, u):
    g = F.preset("schottky_pants", 2.0, 1.5, 2.5)
    w, u = tuple(w), tuple(u)
    direct = np.trace(F.holonomy(g, w))
    conj = np.trace(F.holonomy(g, u + w + invert_word(u)))
    assert conj == pytest.approx(direct, rel=1e-9, abs=1e-9)


def test_length_of_known_traces():
    assert F.length_of(2.5) == pytest.approx(2 * math.log(2), abs=1e-12)
    assert F.length_of(-2.5) == pytest.approx(2 * math.log(2), abs=1e-12)
    assert F.length_of(2 * math.cosh(3)) == pytest.approx(6.0, abs=1e-12)


def test_length_of_rejects_nonhyperbolic():
    with pytest.raises(F.NonHyperbolicElement):
        F.length_of(2.0)
    with pytest.raises(F.NonHyperbolicElement):
        F.length_of(-1.3)


def test_poincare_det_values():
    assert F.poincare_det(2 * math.log(2)) == pytest.approx(2.25, abs=1e-12)
    assert F.poincare_det(2.0) == pytest.approx(4 * math.sinh(1.0) ** 2, abs=1e-12)
    # small-length Taylor behaviour: 4 sinh^2(l/2) ~ l^2
    for ell in (1e-3, 1e-5):
        assert F.poincare_det(ell) == pytest.approx(ell * ell, rel=1e-5)


def test_log_poincare_det_consistency():
    for ell in (0.5, 2.0, 7.0, 12.0):
        assert F.log_poincare_det(ell) == pytest.approx(
            math.log(F.poincare_det(ell)), abs=1e-12
        )
    # stays finite where the linear value overflows
    assert F.log_poincare_det(1500.0) == pytest.approx(1500.0, rel=1e-12)


# ---------------------------------------------------------------------------
# spectra versus exhaustive enumeration


def brute_classes(group, l_max, max_word_len):
    """Classes with ell <= l_max from plain word enumeration, no pruning."""
    out = {}
    for cls in enumerate_classes(group.group, max_word_len):
        tr = np.trace(F.holonomy(group, cls.canonical))
        if abs(tr) <= 2.0 + 1e-9:
            continue
        ell = F.length_of(tr)
        if ell <= l_max:
            out[cls.canonical] = ell
    return out


def test_pants_spectrum_matches_brute_force(pants, pants_spectrum6):
    oracle = brute_classes(pants, 6.0, 6)
    got = {r.word: r.length for r in pants_spectrum6.records}
    assert set(got) == set(oracle)
    for w, ell in oracle.items():
        assert got[w] == pytest.approx(ell, abs=1e-9)


def test_pants_spectrum_just_above_generators(pants):
    sp = F.build_spectrum(pants, 2.05, oriented=False)
    # X, Y and the third boundary XY all have length exactly 2
    assert len(sp.records) == 3
    assert all(r.length == pytest.approx(2.0, abs=1e-9) for r in sp.records)
    oracle = brute_classes(pants, 2.05, 4)
    kept = {canonical_class(w, pants.group).pick_unoriented() for w in oracle}
    assert {r.cls.pick_unoriented() for r in sp.records} == kept


def test_oriented_doubles_chiral_classes(pants):
    oriented = F.build_spectrum(pants, 5.0, oriented=True)
    folded = F.build_spectrum(pants, 5.0, oriented=False)
    chiral = sum(1 for r in folded.records if not r.cls.is_inverse_self)
    achiral = len(folded.records) - chiral
    assert len(oriented.records) == 2 * chiral + achiral


def test_oriented_spectrum_closed_under_inversion(octagon_spectrum6):
    words = {r.word for r in octagon_spectrum6.records}
    for r in octagon_spectrum6.records:
        assert r.cls.inverse_canonical in words


def test_octagon_spectrum_matches_word_oracle(octagon, octagon_spectrum6):
    # independent oracle with no shell machinery: every class whose canonical
    # spelling fits in 5 letters must come out of plain word enumeration too
    oracle = {}
    for cls in enumerate_classes(octagon.group, 5):
        tr = np.trace(F.holonomy(octagon, cls.canonical))
        if abs(tr) <= 2.0 + 1e-9:
            continue
        ell = F.length_of(tr)
        if ell <= 6.0:
            oracle[cls.canonical] = ell
    got = {r.word: r.length for r in octagon_spectrum6.records if len(r.word) <= 5}
    assert set(got) == set(oracle)
    for w, ell in oracle.items():
        assert got[w] == pytest.approx(ell, abs=1e-9)


def test_octagon_pruning_margin_stable(octagon, octagon_spectrum6):
    # widening the displacement cut (and the trace window with it) must not
    # reveal any additional classes below the original bound
    wide, _ = F._enumerate_cocompact(octagon, 6.0 + 1.0)
    found = set()
    for block in F._unique_min_rotations(wide):
        for row in block:
            cls = canonical_class(F._codes_to_word(row, 4), octagon.group)
            tr = np.trace(F.holonomy(octagon, cls.canonical))
            if abs(tr) > 2 + 1e-9 and F.length_of(tr) <= 6.0:
                found.add(cls.canonical)
    got = {r.word for r in octagon_spectrum6.records}
    assert got == found


def test_octagon_growth_trend(octagon):
    sp = F.build_spectrum(octagon, 9.0)
    for L in (6, 7, 8, 9):
        n = sum(1 for r in sp.records if r.power == 1 and r.length <= L)
        ratio = n / (math.exp(L) / L)
        assert 0.3 < ratio < 3.0


def test_records_sorted_with_dense_ids(octagon_spectrum6):
    lengths = [r.length for r in octagon_spectrum6.records]
    assert lengths == sorted(lengths)
    assert [r.class_id for r in octagon_spectrum6.records] == list(
        range(len(octagon_spectrum6.records))
    )


def test_det_identity_against_trace(octagon, octagon_spectrum6):
    # independent route: |det(I-P)| = |tr(g)^2 - 4| for hyperbolic g
    for r in octagon_spectrum6.records:
        tr = np.trace(F.holonomy(octagon, r.word))
        assert abs(tr * tr - 4) == pytest.approx(
            F.poincare_det(r.length), rel=1e-10
        )
        assert r.log_det == pytest.approx(F.log_poincare_det(r.length), abs=1e-12)


def test_power_records(octagon_spectrum6):
    group = octagon_spectrum6.group.group
    prims = octagon_spectrum6.primitives()
    powers = [r for r in octagon_spectrum6.records if r.power > 1]
    assert powers
    for r in powers:
        roots = [
            s
            for s in prims
            if abs(s.length - r.primitive_length) < 1e-9
            and canonical_class(word_power(s.word, r.power), group).canonical
            == r.word
        ]
        assert len(roots) == 1
        assert r.length == r.power * r.primitive_length  # exact float identity
        assert r.homology == tuple(r.power * h for h in roots[0].homology)


def test_power_trace_cross_check(octagon, octagon_spectrum6):
    for r in octagon_spectrum6.records:
        tr = abs(np.trace(F.holonomy(octagon, r.word)))
        assert tr == pytest.approx(
            2 * math.cosh(r.power * r.primitive_length / 2), rel=1e-8
        )


def test_torus_incomplete_enumeration(torus):
    with pytest.raises(F.IncompleteEnumeration):
        F.build_spectrum(torus, 12.0)
    sp = F.build_spectrum(torus, 12.0, allow_incomplete=True)
    assert not sp.certificate["complete"]
    assert sp.certified_l_max < 12.0
    assert all(r.length <= sp.certified_l_max + 1e-9 for r in sp.records)


def test_torus_capped_consistent_with_longer_cap(torus):
    short = F.build_spectrum(torus, 8.0, allow_incomplete=True, max_word_length=10)
    longer = F.build_spectrum(torus, 8.0, allow_incomplete=True, max_word_length=13)
    cutoff = short.certified_l_max
    short_set = {r.word for r in short.records}
    longer_set = {r.word for r in longer.records if r.length <= cutoff + 1e-12}
    assert short_set == longer_set


def test_torus_cusp_words_excluded(torus):
    sp = F.build_spectrum(torus, 4.0, allow_incomplete=True, max_word_length=8)
    words = {r.word for r in sp.records}
    comm = canonical_class((1, 2, -1, -2), torus.group).canonical
    assert comm not in words


def test_build_spectrum_deterministic(pants):
    a = F.build_spectrum(pants, 5.0)
    b = F.build_spectrum(pants, 5.0)
    assert [(r.word, r.length, r.log_det) for r in a.records] == [
        (r.word, r.length, r.log_det) for r in b.records
    ]


def test_invalid_l_max(pants):
    with pytest.raises(F.InvalidParameters):
        F.build_spectrum(pants, -1.0)


# ---------------------------------------------------------------------------
# rotation dedup helper


def test_unique_min_rotations_collapses_rotations():
    rows = np.array(
        [[0, 1, 2], [1, 2, 0], [2, 0, 1], [0, 2, 1], [3, 3, 3]], dtype=np.int8
    )
    blocks = F._unique_min_rotations([rows])
    assert len(blocks) == 1
    got = {tuple(int(x) for x in row) for row in blocks[0]}
    assert got == {(0, 1, 2), (0, 2, 1), (3, 3, 3)}


# ---------------------------------------------------------------------------
# checks and tails


def test_anosov_power_check(octagon_spectrum6):
    report = F.anosov_power_check(octagon_spectrum6)
    assert report["all_pass"]
    assert report["checked"] == len(octagon_spectrum6.records)
    # curvature -1 bound with C=1, theta=1: sinh(2)/sinh(1) >= e
    assert 4 * math.sinh(2.0) ** 2 / (4 * math.sinh(1.0) ** 2) >= math.e**2


def test_exponential_tail_decreasing(pants_spectrum6):
    values = [F.exponential_tail(pants_spectrum6, 2, s) for s in (0.0, 0.5, 1.0, 2.0)]
    assert all(math.isfinite(v) and v > 0 for v in values)
    assert values == sorted(values, reverse=True)


# ---------------------------------------------------------------------------
# CSV round trip


def test_csv_round_trip(tmp_path, pants_spectrum6):
    path = str(tmp_path / "spec.csv")
    F.spectrum_to_csv(pants_spectrum6, path)
    rows, meta = F.spectrum_from_csv(path)
    assert meta["preset"] == "schottky_pants"
    assert int(meta["format_version"]) == F.SPECTRUM_FORMAT_VERSION
    assert float(meta["l_max"]) == pants_spectrum6.l_max
    assert len(rows) == len(pants_spectrum6.records)
    for row, rec in zip(rows, pants_spectrum6.records):
        assert row["classId"] == rec.class_id
        assert row["word"] == rec.word
        assert row["ell"] == rec.length  # repr round trip is bit exact
        assert row["ell_sharp"] == rec.primitive_length
        assert row["k"] == rec.power
        assert row["log_detIminusP"] == rec.log_det
        assert row["homology"] == rec.homology


def test_word_text_round_trip():
    for w in [(1,), (1, -2, 3, -4), (-1, -1, 2)]:
        assert F.word_from_text(F.word_to_text(w)) == w
