import random
from pathlib import Path

import pytest

from termsimplify.corpus_index import Document, IdfIndex, TextRecord, build_idf_index

FIXTURES = Path(__file__).parent / "fixtures"

SCIENCE_DOCS = [
    "Haloperidol and olanzapine are antipsychotic drugs compared in randomised trials.",
    "Primary acoustic modeling improves speech recognition.",
    "Randomised trials measured quality of care outcomes.",
    "Acoustic modeling uses convolutional neural networks.",
    "Telephone interventions support self-management of symptoms.",
    "Meta-analysis of randomised trials showed heterogeneity.",
]
LIFESTYLE_DOCS = [
    "I went for a run and then made coffee with friends.",
    "Our telephone broke so we called the shop.",
    "Quality of care at the spa was great.",
    "Coffee and cake every weekend with friends.",
    "Friends recommended a new running shoe.",
    "We watched a film about acoustic guitars.",
]


@pytest.fixture(scope="session")
def science_index():
    return build_idf_index((Document(str(i), t) for i, t in enumerate(SCIENCE_DOCS)), "science")


@pytest.fixture(scope="session")
def lifestyle_index():
    return build_idf_index((Document(str(i), t) for i, t in enumerate(LIFESTYLE_DOCS)), "lifestyle")


@pytest.fixture
def dataset_50():
    return FIXTURES / "dataset_50.tsv"


WORDS = (
    "haloperidol olanzapine acoustic modeling primary neural network trial care quality telephone "
    "intervention cancer symptom patient dose placebo cohort bias evidence outcome coffee friends "
    "run cake film guitar shop weekend spa"
).split()
STOP = "the of a and in with for to was".split()


def synthetic_indexes(rng: random.Random, n_docs: int = 50):
    """Random df tables for a fixed vocabulary of unigrams and some bigrams."""
    terms = list(WORDS)
    for _ in range(40):
        terms.append(f"{rng.choice(WORDS)} {rng.choice(WORDS)}")
    sci = {t: rng.randint(1, n_docs) for t in terms if rng.random() < 0.8}
    life = {t: rng.randint(1, n_docs) for t in terms if rng.random() < 0.6}
    return IdfIndex("science", n_docs, sci), IdfIndex("lifestyle", n_docs, life)


def random_sentence(rng: random.Random, max_words: int = 14) -> str:
    pieces = []
    for _ in range(rng.randint(1, max_words)):
        word = rng.choice(WORDS + STOP)
        if rng.random() < 0.15:
            word = word.capitalize()
        pieces.append(word)
        r = rng.random()
        if r < 0.08:
            pieces.append(rng.choice([",", ";", " -", " (", ")", "."]))
        pieces.append(rng.choice([" ", " ", " ", "  ", "\t"]))
    return "".join(pieces).rstrip() + rng.choice(["", ".", "?"])


def make_records(n: int, seed: int = 0) -> list[TextRecord]:
    rng = random.Random(seed)
    return [
        TextRecord(f"CD{i // 20:06d}", str((i // 5) % 4), str(i), random_sentence(rng).replace("\t", " ") or "x")
        for i in range(n)
    ]


# one line per acceptance criterion, filled in by test_acceptance.py
ACCEPTANCE_RESULTS: list[tuple[int, str, str, float, str]] = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number, status, title, elapsed, note in sorted(ACCEPTANCE_RESULTS):
        line = f"[{status}] criterion {number}: {title} ({elapsed:.2f}s)"
        terminalreporter.write_line(line + (f" - {note}" if note else ""))
