import pytest

from lexrag import synthetic
from lexrag.corpus import Document, load_benchmarks, load_corpus
from lexrag.embedding import HashedNgramBackend

# ---------------------------------------------------------------------------
# acceptance summary: tests marked @pytest.mark.acceptance(num=..., desc=...)
# get one PASS/FAIL line each in the terminal summary

_ACCEPTANCE_RESULTS: dict[int, tuple[str, str]] = {}


def pytest_configure(config):
    config.addinivalue_line(
        "markers",
        "acceptance(num, desc): end-to-end acceptance criterion with summary line",
    )


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("acceptance")
    if marker and report.when == "call":
        status = "PASS" if report.passed else "FAIL"
        _ACCEPTANCE_RESULTS[marker.kwargs["num"]] = (status, marker.kwargs["desc"])


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not _ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(_ACCEPTANCE_RESULTS):
        status, desc = _ACCEPTANCE_RESULTS[num]
        terminalreporter.write_line(f"[{status}] criterion {num:2d}: {desc}")


# ---------------------------------------------------------------------------
# shared fixtures


@pytest.fixture(scope="session")
def backend():
    return HashedNgramBackend(dim=256)


@pytest.fixture(scope="session")
def synth_root(tmp_path_factory):
    """20 docs / 100 queries synthetic dataset, written to disk once."""
    root = tmp_path_factory.mktemp("synth")
    data = synthetic.generate(seed=7, n_queries=100, docs_per_domain=5, min_doc_chars=2000)
    synthetic.write_dataset(data, root)
    return root


@pytest.fixture(scope="session")
def synth_corpus(synth_root):
    return load_corpus(synth_root / "corpus")


@pytest.fixture(scope="session")
def synth_benchmark(synth_root, synth_corpus):
    paths = sorted((synth_root / "benchmarks").glob("*.json"))
    return load_benchmarks(paths, synth_corpus)


@pytest.fixture()
def tiny_doc():
    return Document(
        doc_id="contracts/acme.txt",
        text=(
            "Confidentiality Agreement between Acme Corp and Zenith Ltd.\n\n"
            "Clause 1: The Receiving Party shall keep all Confidential "
            "Information secret for five years.\n\n"
            "Clause 2: Upon termination, all materials shall be returned "
            "or destroyed within thirty days."
        ),
    )
