"""Shift schedules for convolution with duplicated kernels.

A kernel of width ``k`` is stored ``N`` times back to back; block ``n`` sees
the input vector shifted by ``a`` positions and produces output ``m`` whenever

    m * s == n * k + a

For odd ``k``, ``s < k`` and a solution ``m1 * s == n1 * k + 1``, the shifts
``a = 0 .. l-1`` (``l = lcm(k, s) / s``) together produce every output exactly
once.  This module finds ``(m1, n1)``, enumerates the ``(a, n, m)`` triples and
checks the partition property directly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Optional

from .errors import ConditionViolation

# Values stay well inside int64 for every realistic kernel; larger inputs are
# rejected instead of silently producing huge schedules.
_INT_LIMIT = 2 ** 31


def _lcm(a: int, b: int) -> int:
    return a * b // math.gcd(a, b)


@dataclass(frozen=True)
class KernelGeometry:
    k: int
    s: int

    def __post_init__(self):
        for name in ("k", "s"):
            value = getattr(self, name)
            if isinstance(value, bool) or not isinstance(value, int):
                raise TypeError("%s must be an int, got %r" % (name, value))
            if value < 1:
                raise ValueError("%s must be >= 1, got %d" % (name, value))
            if value >= _INT_LIMIT:
                raise OverflowError("%s=%d is outside the supported range" % (name, value))

    @property
    def lcm(self) -> int:
        return _lcm(self.k, self.s)

    @property
    def l(self) -> int:  # noqa: E743
        """Number of shift cycles, ``lcm(k, s) / s``."""
        return self.lcm // self.s

    @property
    def period_n(self) -> int:
        """Block-index period, ``lcm(k, s) / k``."""
        return self.lcm // self.k


@dataclass(frozen=True)
class ScheduleParams:
    geometry: KernelGeometry
    l: int  # noqa: E741
    period_n: int
    m1: int
    n1: int

    def __post_init__(self):
        g = self.geometry
        if self.m1 * g.s != self.n1 * g.k + 1:
            raise ValueError("m1*s != n1*k + 1 for %r" % (self,))
        if g.k % 2 == 1 and g.s < g.k and not (0 <= self.m1 < self.l and 0 <= self.n1 < self.period_n):
            raise ValueError("(m1, n1) not reduced: %r" % (self,))

    @classmethod
    def for_geometry(cls, geometry: KernelGeometry) -> "ScheduleParams":
        report = check_conditions(geometry)
        if report.params is None:
            raise ConditionViolation(report)
        return report.params


@dataclass(frozen=True)
class ConditionReport:
    geometry: KernelGeometry
    cond1: bool
    cond2: bool
    cond3: bool
    params: Optional[ScheduleParams] = None

    @property
    def ok(self) -> bool:
        return self.cond1 and self.cond2 and self.cond3

    def describe(self) -> str:
        g = self.geometry
        lines = [
            "k=%d s=%d l=%d period_n=%d" % (g.k, g.s, g.l, g.period_n),
            "  condition 1 (k odd, s < k):          %s" % _flag(self.cond1),
            "  condition 2 (m1*s = n1*k + 1 exists): %s" % _flag(self.cond2),
            "  condition 3 (gcd(m1, l) = 1):        %s" % _flag(self.cond3),
        ]
        if self.params is not None:
            lines.append("  m1=%d n1=%d" % (self.params.m1, self.params.n1))
        return "\n".join(lines)


def _flag(value: bool) -> str:
    return "ok" if value else "FAILED"


@dataclass(frozen=True)
class ShiftSchedule:
    """Ordered ``(a, n, m)`` triples covering one sub-map of ``N`` blocks."""

    params: ScheduleParams
    N: int
    steps: tuple

    @property
    def geometry(self) -> KernelGeometry:
        return self.params.geometry

    @property
    def n_outputs(self) -> int:
        return len(self.steps)

    @property
    def input_width(self) -> int:
        """IA vector length the schedule consumes, ``N*k + l - 1``."""
        return self.N * self.geometry.k + self.params.l - 1

    def outputs(self) -> list:
        return [m for _, _, m in self.steps]

    def by_shift(self) -> dict:
        """Map each shift ``a`` to its ordered ``(n, m)`` pairs."""
        out = {}
        for a, n, m in self.steps:
            out.setdefault(a, []).append((n, m))
        return out


def find_m1_n1(geometry: KernelGeometry):
    """Least ``(m1, n1)`` with ``m1*s == n1*k + 1``, or ``None``.

    Solutions repeat with period ``lcm(k, s)`` in ``m*s``, so scanning
    ``m`` over ``[0, lcm(k, s)]`` is exhaustive.  For ``s < k`` the least
    solution already lies below ``(l, period_n)``; for ``s >= k`` it may not,
    and is returned unreduced so the defining relation still holds.
    """
    k, s = geometry.k, geometry.s
    for m in range(geometry.lcm + 1):
        rem = m * s - 1
        if rem >= 0 and rem % k == 0:
            return m, rem // k
    return None


def check_conditions(geometry: KernelGeometry) -> ConditionReport:
    cond1 = geometry.k % 2 == 1 and geometry.s < geometry.k
    found = find_m1_n1(geometry)
    if found is None:
        return ConditionReport(geometry, cond1, False, False, None)
    m1, n1 = found
    cond3 = math.gcd(m1, geometry.l) == 1
    params = ScheduleParams(geometry, geometry.l, geometry.period_n, m1, n1)
    return ConditionReport(geometry, cond1, True, cond3, params)


def index_sets(params: ScheduleParams, a: int, N: int) -> list:
    """``(n, m)`` pairs enabled at shift ``a`` for ``N`` kernel blocks."""
    if not 0 <= a < params.l:
        raise ValueError("shift a=%d outside [0, %d)" % (a, params.l))
    if N < 0:
        raise ValueError("N must be non-negative")
    n = a * params.n1 % params.period_n
    m = a * params.m1 % params.l
    pairs = []
    while n < N:
        pairs.append((n, m))
        n += params.period_n
        m += params.l
    return pairs


def output_count(geometry: KernelGeometry, N: int) -> int:
    """Outputs produced by ``N`` blocks: ``floor(((N-1)k + l - 1)/s) + 1``."""
    return ((N - 1) * geometry.k + geometry.l - 1) // geometry.s + 1


@lru_cache(maxsize=512)
def _cached_schedule(k: int, s: int, N: int) -> ShiftSchedule:
    geometry = KernelGeometry(k, s)
    report = check_conditions(geometry)
    if not report.ok:
        raise ConditionViolation(report)
    params = report.params
    steps = []
    for a in range(params.l):
        for n, m in index_sets(params, a, N):
            steps.append((a, n, m))
    return ShiftSchedule(params, N, tuple(steps))


def full_schedule(geometry: KernelGeometry, N: int) -> ShiftSchedule:
    """All shift cycles of the 1D duplicated-kernel convolution, in order.

    Raises :class:`ConditionViolation` when the geometry fails any of the
    three scheduling conditions.
    """
    if N < 1:
        raise ValueError("duplication count N must be >= 1, got %d" % N)
    return _cached_schedule(geometry.k, geometry.s, N)


def residue_sets(params: ScheduleParams, bound: int) -> list:
    """The sets ``{i*l + (a*m1 mod l)} ∩ [0, bound)`` for each shift ``a``."""
    sets = []
    for a in range(params.l):
        start = a * params.m1 % params.l
        sets.append(set(range(start, bound, params.l)))
    return sets


def verify_partition(geometry: KernelGeometry, bound: int) -> bool:
    """True iff the per-shift output sets tile ``{0, ..., bound-1}``."""
    report = check_conditions(geometry)
    if report.params is None:
        return False
    sets = residue_sets(report.params, bound)
    total = sum(len(x) for x in sets)
    union = set().union(*sets)
    return total == len(union) and union == set(range(bound))
