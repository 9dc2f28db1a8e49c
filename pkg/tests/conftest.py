import json
import time

import numpy as np
import pytest

from mfs import cli
from mfs.grid import GridDomain, KernelQuadrature
from mfs.nfunc import AnisotropicP, DoublePhase, LogPerturbed, SmoothBump, VariableExponent


def builtin_families():
    return {
        "doublephase": DoublePhase(2.0, 3.0),
        "pxy": VariableExponent(SmoothBump(2.0, 0.4)),
        "logpert": LogPerturbed(2.0),
        "anisotropic": AnisotropicP(2.0),
    }


@pytest.fixture(scope="session")
def families():
    return builtin_families()


@pytest.fixture(scope="session")
def dom12():
    return GridDomain.unit(12)


@pytest.fixture(scope="session")
def quad12(dom12):
    return KernelQuadrature(dom12, 0.25)


@pytest.fixture(scope="session")
def dom6():
    return GridDomain.unit(6)


@pytest.fixture(scope="session")
def quad6(dom6):
    return KernelQuadrature(dom6, 0.25)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


_SOLVES = {}


@pytest.fixture(scope="session")
def cli_solve(tmp_path_factory):
    """Run `mfs solve --problem <name>` once per session; returns (code, report, seconds, dir)."""

    def run(problem):
        if problem not in _SOLVES:
            out = tmp_path_factory.mktemp(f"solve-{problem}")
            t0 = time.perf_counter()
            code = cli.main(["solve", "--problem", problem, "--out", str(out)])
            dt = time.perf_counter() - t0
            with open(out / "report.json") as fh:
                rep = json.load(fh)
            _SOLVES[problem] = (code, rep, dt, out)
        return _SOLVES[problem]

    return run
