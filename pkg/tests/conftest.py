import time

import numpy as np
import pytest

from supgafem.cli import read_results, run


class RunRegistry:
    """Executes benchmark configurations once per session and caches the
    parsed CSV columns, records, and output paths."""

    def __init__(self, root):
        self.root = root
        self._cache = {}

    def get(self, problem, degree, theta, max_dofs=None, max_steps=60,
            snapshots=()):
        key = (problem, degree, theta, max_dofs, max_steps, tuple(snapshots))
        if key not in self._cache:
            tag = f"{problem}_p{degree}_theta{theta}_{max_dofs}_{max_steps}"
            out = self.root / tag.replace(".", "_")
            t0 = time.perf_counter()
            status = run(problem, degree, theta, out, max_dofs=max_dofs,
                         max_steps=max_steps, snapshot_steps=snapshots)
            wall = time.perf_counter() - t0
            assert status == 0, f"run {tag} failed"
            cols = read_results(out / "results.csv")
            self._cache[key] = {"cols": cols, "dir": out, "wall": wall}
        return self._cache[key]

    def all_runs(self):
        return list(self._cache.values())


@pytest.fixture(scope="session")
def registry(tmp_path_factory):
    return RunRegistry(tmp_path_factory.mktemp("bench_runs"))


def tail_slope(n_elem, values, window=10.0):
    """Least-squares decay rate over the trailing window of element counts."""
    keep = np.isfinite(values) & (values > 0)
    n_elem, values = n_elem[keep], values[keep]
    tail = n_elem >= n_elem[-1] / window
    if tail.sum() < 4:
        tail = np.arange(len(n_elem)) >= len(n_elem) - 4
    return float(-np.polyfit(np.log(n_elem[tail]), np.log(values[tail]), 1)[0])


def report(criterion, ok, detail):
    status = "PASS" if ok else "FAIL"
    print(f"{criterion} {status}: {detail}")
    assert ok, f"{criterion} {status}: {detail}"
