import pytest

from energy_pomdp.benchmarks import corridor, energy_tiger

ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def tiger():
    return energy_tiger()


@pytest.fixture(scope="session")
def corridor_pair():
    """(infeasible, feasible): the same 5-cell chain with cap 3, without and with a reload."""
    return corridor(5, 3), corridor(5, 3, reload_at=2)


class Pipeline:
    """Product, qualitative analysis and a solved value table for one model."""

    def __init__(self, model, trials: int = 3000, seed: int = 0):
        from energy_pomdp.product import build_product
        from energy_pomdp.qualitative import analyze
        from energy_pomdp.rtdp import solve

        self.model = model
        self.product = build_product(model)
        self.analysis = analyze(self.product)
        self.allowed = self.analysis.allowed
        self.solved = solve(self.product, self.allowed, trials=trials, seed=seed)
        self.table = self.solved.table


@pytest.fixture(scope="session")
def hallway6():
    from energy_pomdp.benchmarks import gen_hallway, hallway_spec

    return Pipeline(gen_hallway(hallway_spec("6x6")))
