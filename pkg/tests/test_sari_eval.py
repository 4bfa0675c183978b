import json
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from termsimplify.sari_eval import (
    AlignmentError,
    EmptyReferenceSet,
    EvalInstance,
    diff_html,
    diff_report,
    evaluate_run,
    load_references,
    sari,
    sari_score,
    sari_tokenize,
)

from conftest import FIXTURES
from oracles import oracle_sari

SOURCES = FIXTURES / "eval_sources.tsv"
REFS_ORIGINAL = FIXTURES / "eval_refs_original.tsv"
REFS_AUTO = FIXTURES / "eval_refs_auto.jsonl"


def test_tokenizer_lowercases_and_detaches_punctuation():
    assert sari_tokenize("Haloperidol, (an OLD drug).") == ["haloperidol", ",", "(", "an", "old", "drug", ")", "."]


def test_identity_three_tokens():
    # orders 1..3 each give (0 + 1 + 0) / 3; order 4 has no n-grams at all
    b = sari(EvalInstance("a b c", "a b c", ("a b c",)))
    assert [b.f_keep[n] for n in (1, 2, 3, 4)] == [1.0, 1.0, 1.0, 0.0]
    assert all(b.f_add[n] == 0.0 and b.p_del[n] == 0.0 for n in (1, 2, 3, 4))
    assert b.final == pytest.approx(25.0)


def test_identity_long_enough_for_all_orders():
    assert sari_score("a b c d e", "a b c d e", ["a b c d e"]) == pytest.approx(100 / 3)


def test_perfect_output_hand_example():
    src = "the cat sat on the mat today"
    out = "a cat sat on the mat now"
    assert sari_score(src, out, [out]) == pytest.approx(100.0)


def test_perfect_rewrite_sharing_no_ngram_is_capped():
    # nothing kept at any order: keep is 0/0 -> 0 everywhere, del and add are perfect
    assert sari_score("the cat sat", "a dog ran", ["a dog ran"]) == pytest.approx(100 * (3 * 2 / 3) / 4)


def test_hand_computed_unigram_components():
    # S = a b c, O = a d, R = a d ; unigram: add {d} correct, keep {a}, delete {b, c}
    b = sari(EvalInstance("a b c", "a d", ("a d",)))
    assert (b.f_add[1], b.f_keep[1], b.p_del[1]) == (1.0, 1.0, 1.0)


def test_empty_reference_set():
    with pytest.raises(EmptyReferenceSet):
        EvalInstance("a", "a", ())


VOCAB = "a b c d e f".split()


def random_instance(rng):
    def sent():
        return [rng.choice(VOCAB) for _ in range(rng.randint(1, 8))]

    src = sent()
    out = sent() if rng.random() < 0.7 else list(src)
    refs = [sent() for _ in range(rng.randint(1, 3))]
    if rng.random() < 0.2:
        refs[0] = list(out)
    return src, out, refs


def test_matches_oracle_on_1000_random_instances():
    rng = random.Random(2024)
    for _ in range(1000):
        src, out, refs = random_instance(rng)
        got = sari_score(" ".join(src), " ".join(out), [" ".join(r) for r in refs])
        assert got == pytest.approx(oracle_sari(src, out, refs), abs=1e-9)


tokens = st.lists(st.sampled_from(VOCAB), min_size=0, max_size=10)


@settings(max_examples=300, deadline=None)
@given(tokens, tokens, st.lists(tokens, min_size=1, max_size=4), st.randoms(use_true_random=False))
def test_range_and_reference_permutation(src, out, refs, rnd):
    s, o, r = " ".join(src), " ".join(out), [" ".join(x) for x in refs]
    score = sari_score(s, o, r)
    assert 0.0 <= score <= 100.0
    shuffled = list(r)
    rnd.shuffle(shuffled)
    assert sari_score(s, o, shuffled) == score


def _nondegenerate(src, out):
    for n in (1, 2, 3, 4):
        s = {tuple(src[i : i + n]) for i in range(len(src) - n + 1)}
        o = {tuple(out[i : i + n]) for i in range(len(out) - n + 1)}
        if not (o - s and s - o and o & s):
            return False
    return True


def test_perfect_output_property():
    rng = random.Random(9)
    checked = 0
    while checked < 200:
        src = [rng.choice(VOCAB) for _ in range(rng.randint(6, 12))]
        out = [rng.choice(VOCAB) for _ in range(rng.randint(6, 12))]
        if not _nondegenerate(src, out):
            continue
        refs = [" ".join(out)] * rng.randint(1, 3)
        assert sari_score(" ".join(src), " ".join(out), refs) == pytest.approx(100.0)
        checked += 1


# --- diff ---------------------------------------------------------------------


def test_diff_identical_is_empty():
    assert diff_report("same words here", "same words here") == []


def test_diff_single_replace():
    (span,) = diff_report("a b c", "a X c")
    assert span.op == "replace"
    assert span.source_range == (1, 2) and span.output_range == (1, 2)
    assert (span.source_text, span.output_text) == ("b", "X")


def test_diff_insert_and_delete():
    ops = [(s.op, s.source_text, s.output_text) for s in diff_report("a b c d", "a c d e")]
    assert ops == [("delete", "b", ""), ("insert", "", "e")]


def test_diff_on_worked_simplification():
    src = (
        "For every nine people treated with haloperidol instead of olanzapine, one fewer person would "
        "experience clinically important improvement in quality of life."
    )
    out = (
        "For every nine people treated with haloperidol (a medication used for mental health conditions) "
        "instead of olanzapine (another mental health drug), one fewer person would experience a meaningful "
        "improvement in their quality of life."
    )
    spans = diff_report(src, out)
    assert spans[0].op == "insert"
    assert spans[0].output_text == "(a medication used for mental health conditions)"
    assert "<ins>(a medication used for mental health conditions)</ins>" in diff_html(src, out)


# --- run evaluation -------------------------------------------------------------


def write_submission(path, rows):
    path.write_text(
        "pair_id\tpara_id\tsent_id\tsimplified_text\n" + "".join("\t".join(k) + "\t" + v + "\n" for k, v in rows),
        encoding="utf-8",
    )
    return path


def source_rows():
    lines = SOURCES.read_text(encoding="utf-8").splitlines()[1:]
    return [(tuple(c[:3]), c[3]) for c in (l.split("\t") for l in lines)]


def test_reference_loaders():
    original = load_references(REFS_ORIGINAL)
    auto = load_references(REFS_AUTO)
    assert len(original) == len(auto) == 10
    assert all(len(v) == 2 for v in original.values())
    assert all(len(v) == 1 for v in auto.values())


def test_baseline_run_equals_identity_row(tmp_path):
    sub = write_submission(tmp_path / "sub.tsv", source_rows())
    report, _, _ = evaluate_run(sub, SOURCES, {"simple original": REFS_ORIGINAL, "simple auto": REFS_AUTO})
    for row in report.reference_sets.values():
        assert row["n"] == 10
        assert row["mean_sari"] == row["identity_baseline"]


def test_outputs_equal_to_reference(tmp_path):
    refs = load_references(REFS_AUTO)
    sub = write_submission(tmp_path / "sub.tsv", [(k, refs[k][0]) for k, _ in source_rows()])
    report, sources, outputs = evaluate_run(sub, SOURCES, {"simple auto": REFS_AUTO})
    row = report.reference_sets["simple auto"]
    per_instance = [i["sari"] for i in report.instances]
    assert row["mean_sari"] == pytest.approx(sum(per_instance) / 10)
    perfect = 0
    for key, score in zip(refs, per_instance):
        src, out = sari_tokenize(sources[key]), sari_tokenize(outputs[key])
        if _nondegenerate(src, out):
            assert score == pytest.approx(100.0)
            perfect += 1
    assert perfect >= 1
    assert row["mean_sari"] > row["identity_baseline"]
    report.write(tmp_path / "eval", sources, outputs)
    summary = json.loads((tmp_path / "eval" / "eval_summary.json").read_text())
    assert summary["n_instances"] == 10
    assert len((tmp_path / "eval" / "eval_instances.csv").read_text().splitlines()) == 11
    assert "<table>" in (tmp_path / "eval" / "diff_report.html").read_text()


def test_alignment_errors_list_ids(tmp_path):
    rows = source_rows()
    sub = write_submission(tmp_path / "sub.tsv", rows[:-1] + [(("ZZ", "0", "99"), "extra")])
    with pytest.raises(AlignmentError) as err:
        evaluate_run(sub, SOURCES, {"r": REFS_AUTO})
    assert err.value.missing == [rows[-1][0]]
    assert err.value.extra == [("ZZ", "0", "99")]


def test_reference_misalignment(tmp_path):
    sub = write_submission(tmp_path / "sub.tsv", source_rows())
    refs = load_references(REFS_AUTO)
    refs.pop(next(iter(refs)))
    with pytest.raises(AlignmentError):
        evaluate_run(sub, SOURCES, {"partial": refs})
