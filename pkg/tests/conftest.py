import time
from pathlib import Path

import pytest

from conicbenders import corpus
from conicbenders.gbd import gbd_solve
from conicbenders.subsolver import SolverConfig

ROOT = Path(__file__).resolve().parents[1]
INSTANCES = ROOT / "instances"

CORPUS_SEED = 20240611
CORPUS_EPS = 1e-3

# one line per acceptance criterion, echoed in the terminal summary
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)


@pytest.fixture
def toy():
    return corpus.toy_instance()


@pytest.fixture(scope="session")
def generated_corpus():
    start = time.perf_counter()
    instances = corpus.generate_corpus(50, CORPUS_SEED)
    return instances, time.perf_counter() - start


@pytest.fixture(scope="session")
def corpus_runs(generated_corpus):
    instances, gen_time = generated_corpus
    cfg = SolverConfig()
    start = time.perf_counter()
    reports = [gbd_solve(inst, CORPUS_EPS, cfg) for inst in instances]
    return reports, gen_time + time.perf_counter() - start
