from pathlib import Path

import numpy as np
import pytest

from localgcl.data import Graph, GraphDataset

HERE = Path(__file__).parent
FIXTURES = HERE / "fixtures"
DATA = HERE.parent / "data"


def random_graph(rng, n_min=1, n_max=12, d=4, p=None, label=None) -> Graph:
    n = int(rng.integers(n_min, n_max + 1))
    p = rng.uniform(0.1, 0.6) if p is None else p
    iu, ju = np.triu_indices(n, k=1)
    keep = rng.random(len(iu)) < p
    edges = np.stack([iu[keep], ju[keep]], axis=1)
    return Graph(n, edges, rng.normal(size=(n, d)), label)


def toy_dataset(num_graphs=24, d=3, seed=0, n_max=9) -> GraphDataset:
    """Two classes that differ in density; labels alternate."""
    rng = np.random.default_rng(seed)
    graphs = []
    for i in range(num_graphs):
        g = random_graph(rng, 3, n_max, d, p=0.2 if i % 2 else 0.7, label=i % 2)
        graphs.append(g.with_features(np.abs(g.features)))
    return GraphDataset("TOYRAND", tuple(graphs), 2, d)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def mutag_root():
    if not (DATA / "MUTAG" / "MUTAG_A.txt").is_file():
        pytest.skip("MUTAG not present under data/")
    return DATA


# -- acceptance report ---------------------------------------------------------

ACCEPTANCE: dict[int, str] = {}


def record(criterion: int, ok: bool | None, detail: str) -> None:
    """Store the one-line verdict printed at the end of the session."""
    tag = {True: "PASS", False: "FAIL", None: "SOFT-FAIL"}[ok]
    ACCEPTANCE[criterion] = f"criterion {criterion}: {tag}  {detail}"
    print(ACCEPTANCE[criterion])


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for c in sorted(ACCEPTANCE):
        terminalreporter.write_line(ACCEPTANCE[c])
