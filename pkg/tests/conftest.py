"""Shared trained-model fixtures and the per-criterion acceptance summary."""

from __future__ import annotations

import pytest

from spontts.adaptation import StageConfig, adapt_fp, adapt_rhythm, adapt_speaker, train_source
from spontts.corpus import SyntheticConfig, build_adaptation_datasets, generate_synthetic_corpus, split_records

ACCEPTANCE_CRITERIA = {
    1: "gradient fidelity",
    2: "FP extraction exactness",
    3: "MoE oracle equivalence",
    4: "threshold monotonicity",
    5: "weighted CE behaviour",
    6: "overfit checks",
    7: "rhythm adaptation directional win",
    8: "stage freezing",
    9: "determinism and persistence",
    10: "pipeline length consistency",
}

_criterion_of: dict[str, int] = {}
_outcomes: dict[int, list[bool]] = {}


def pytest_collection_modifyitems(items):
    for item in items:
        mark = item.get_closest_marker("criterion")
        if mark is not None:
            _criterion_of[item.nodeid] = int(mark.args[0])


def pytest_runtest_logreport(report):
    n = _criterion_of.get(report.nodeid)
    if n is not None and (report.when == "call" or report.failed):
        _outcomes.setdefault(n, []).append(report.passed and report.when == "call")


def pytest_terminal_summary(terminalreporter):
    if not _outcomes:
        return
    terminalreporter.section("acceptance criteria")
    for n, title in ACCEPTANCE_CRITERIA.items():
        results = _outcomes.get(n)
        status = "NOT RUN" if not results else ("PASS" if all(results) else "FAIL")
        terminalreporter.write_line(f"criterion {n:2d} ({title}): {status}")


@pytest.fixture(scope="session")
def reading_corpus():
    return generate_synthetic_corpus(SyntheticConfig.reading(n_utterances=32), 0)


@pytest.fixture(scope="session")
def spon_datasets():
    spon = generate_synthetic_corpus(SyntheticConfig.spontaneous(n_utterances=200), 1)
    return build_adaptation_datasets(spon)


@pytest.fixture(scope="session")
def fp_split(spon_datasets):
    return split_records(spon_datasets.spon_fp, 0.2, 0)


@pytest.fixture(scope="session")
def source_result(reading_corpus):
    return train_source(reading_corpus, StageConfig.default("source"))


@pytest.fixture(scope="session")
def fp_results(source_result, fp_split):
    """FP adaptation on the training split at sigma 5 and sigma 1."""
    train, _ = fp_split
    return {sigma: adapt_fp(source_result.model, train, StageConfig.default("fp", sigma=sigma))
            for sigma in (5.0, 1.0)}


@pytest.fixture(scope="session")
def rhythm_result(fp_results, spon_datasets):
    return adapt_rhythm(fp_results[5.0].model, spon_datasets.spon_rhythm, StageConfig.default("rhythm"))


@pytest.fixture(scope="session")
def speaker_result(rhythm_result, spon_datasets):
    return adapt_speaker(rhythm_result.model, spon_datasets.spon_timbre, "target",
                         StageConfig.default("speaker"))
