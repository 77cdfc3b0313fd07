import json
import os
import pathlib

import numpy as np
import pytest

from sgkink import analysis as an
from sgkink import cli
from sgkink import dynamics as dyn
from sgkink.grid import make_grid

ROOT = pathlib.Path(__file__).resolve().parents[1]
HEADLINE_CONFIG = ROOT / "configs" / "headline.json"

# criterion number -> (passed, detail); printed in the terminal summary
ACCEPTANCE: dict[int, tuple[bool, str]] = {}


@pytest.fixture(scope="session")
def grid4096():
    return make_grid(4096, 40.0 * np.pi)


@pytest.fixture(scope="session")
def grid1024():
    return make_grid(1024, 20.0 * np.pi)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


class HeadlineRun:
    """Artifacts of the headline simulation, loaded once per session."""

    def __init__(self, run_dir: str):
        self.dir = run_dir
        with open(os.path.join(run_dir, "manifest.json")) as fh:
            self.manifest = json.load(fh)
        self.config = dyn.SimConfig.from_dict(self.manifest["config"])
        self.grid = self.config.grid
        self.summary = cli.build_report(run_dir)
        self.diagnostics = cli.read_diagnostics(os.path.join(run_dir, cli.DIAGNOSTICS_FILE))
        self.probes = cli.read_probes(os.path.join(run_dir, cli.PROBES_FILE))
        self.states = cli.load_snapshots(run_dir, self.grid)

    def load(self, name: str):
        with open(os.path.join(self.dir, name)) as fh:
            return json.load(fh)

    def profiles(self, t_max: float = 250.0):
        return [an.extract_profile(s) for s in self.states if 1.0 - 1e-9 <= s.t <= t_max + 1e-9]

    def state_at(self, t: float):
        return min(self.states, key=lambda s: abs(s.t - t))


@pytest.fixture(scope="session")
def headline(tmp_path_factory):
    """Run the headline configuration (or reuse SGKINK_HEADLINE_DIR if it is set)."""
    reuse = os.environ.get("SGKINK_HEADLINE_DIR")
    if reuse and os.path.isfile(os.path.join(reuse, "manifest.json")):
        return HeadlineRun(reuse)
    out = tmp_path_factory.mktemp("headline")
    config = dyn.load_config(str(HEADLINE_CONFIG))
    code, _ = cli.run_simulation(config, str(out))
    assert code == cli.EXIT_OK
    return HeadlineRun(str(out))


@pytest.fixture
def record_acceptance():
    def rec(number: int, passed: bool, detail: str):
        # several tests may feed one criterion; it passes only if all of them do
        if number in ACCEPTANCE:
            ok, prev = ACCEPTANCE[number]
            ACCEPTANCE[number] = (ok and bool(passed), f"{prev}; {detail}")
        else:
            ACCEPTANCE[number] = (bool(passed), detail)

    return rec


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[k]
        terminalreporter.write_line(f"criterion {k:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
