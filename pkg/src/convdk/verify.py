"""Self-checks: schedule partition grid, oracle sweeps and a mutation canary."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .baselines import plan_layer
from .engine import execute_plan, reference_conv1d, reference_dwconv
from .errors import CapacityError, TooNarrow
from .mapping import Dataflow, LayerSpec, MacroConfig
from .schedule import KernelGeometry, check_conditions, full_schedule, verify_partition

ORACLE_GEOMETRIES = ((3, 1), (3, 2), (5, 1), (5, 2), (5, 3), (7, 2))


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str = ""


@dataclass
class VerifySummary:
    results: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.results)

    def lines(self) -> list:
        return ["%s %s%s" % ("PASS" if r.passed else "FAIL", r.name,
                             " (%s)" % r.detail if r.detail else "") for r in self.results]


def schedulable_grid(kmax: int = 11) -> list:
    """Every ``(k, s)`` with odd ``3 <= k <= kmax`` and ``1 <= s < k``."""
    return [(k, s) for k in range(3, kmax + 1, 2) for s in range(1, k)]


def partition_grid(kmax: int = 11, bound_factor: int = 10) -> CheckResult:
    """Partition holds wherever the conditions do, and only there."""
    bad = []
    n_ok = 0
    for k, s in schedulable_grid(kmax):
        g = KernelGeometry(k, s)
        report = check_conditions(g)
        holds = verify_partition(g, bound_factor * g.lcm)
        if report.ok != holds or report.cond2 != (np.gcd(k, s) == 1):
            bad.append((k, s))
        n_ok += report.ok
    return CheckResult("partition grid kmax=%d" % kmax, not bad,
                       "%d schedulable geometries" % n_ok if not bad else "mismatch at %s" % bad)


def random_layer(rng: np.random.Generator, k: int, s: int, max_c: int = 8, max_hw: int = 32) -> LayerSpec:
    pad = int(rng.integers(0, k // 2 + 1))
    lo = max(1, k - 2 * pad)
    H = int(rng.integers(lo, max_hw + 1))
    W = int(rng.integers(lo, max_hw + 1))
    C = int(rng.integers(1, max_c + 1))
    return LayerSpec("rand", C, H, W, k, k, s, pad)


def random_operands(rng: np.random.Generator, layer: LayerSpec):
    x = rng.integers(-128, 128, size=(layer.C, layer.H, layer.W), dtype=np.int64)
    w = rng.integers(-128, 128, size=(layer.C, layer.k_h, layer.k_w), dtype=np.int64)
    return x, w


def oracle_sweep(n: int = 200, seed: int = 0, macro: MacroConfig = MacroConfig(),
                 dataflows=tuple(Dataflow)) -> CheckResult:
    """Random layers through plan + engine must match the direct convolution."""
    rng = np.random.default_rng(seed)
    failures = []
    ran = 0
    for i in range(n):
        k, s = ORACLE_GEOMETRIES[i % len(ORACLE_GEOMETRIES)]
        layer = random_layer(rng, k, s)
        x, w = random_operands(rng, layer)
        ref = reference_dwconv(x, w, s, layer.padding)
        for df in dataflows:
            try:
                plan = plan_layer(layer, macro, df)
            except (TooNarrow, CapacityError):
                continue
            ran += 1
            if not np.array_equal(execute_plan(plan, x, w), ref):
                failures.append((layer, df.value))
    detail = "%d executions" % ran if not failures else "first mismatch %s" % (failures[0],)
    return CheckResult("oracle sweep n=%d" % n, not failures, detail)


def _mutated_conv1d(I, kernel, s, N):
    """1D duplicated-kernel convolution with ``m1`` replaced by ``m1 + 1``."""
    g = KernelGeometry(len(kernel), s)
    sched = full_schedule(g, N)
    p = sched.params
    z = np.zeros(sched.n_outputs, dtype=np.int64)
    for a, n, m in sched.steps:
        m_bad = m - a * p.m1 % p.l + a * (p.m1 + 1) % p.l
        if m_bad < len(z):
            z[m_bad] = np.dot(kernel, I[n * g.k + a:n * g.k + a + g.k])
    return z


def mutation_canary(seed: int = 0) -> CheckResult:
    """The oracle comparison must catch a schedule with a corrupted offset."""
    rng = np.random.default_rng(seed)
    k, s, N = 3, 2, 10
    g = KernelGeometry(k, s)
    I = rng.integers(-128, 128, size=N * k + g.l - 1, dtype=np.int64)
    kernel = rng.integers(-128, 128, size=k, dtype=np.int64)
    caught = not np.array_equal(_mutated_conv1d(I, kernel, s, N), reference_conv1d(I, kernel, s))
    return CheckResult("mutation canary", caught, "mutated schedule detected" if caught
                       else "mutated schedule went unnoticed")


def run_all(kmax: int = 11, n_oracle: int = 200, seed: int = 0) -> VerifySummary:
    return VerifySummary([partition_grid(kmax), oracle_sweep(n_oracle, seed), mutation_canary(seed)])
