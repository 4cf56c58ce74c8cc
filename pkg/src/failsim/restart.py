"""Sequential restart engine and asymptotic-efficiency estimation.

A task of size D is attempted until the first failure mark strictly exceeds
it; failed attempts cost their full mark.  The engine is vectorized: all
pending tasks are scanned in doubling batches of marks, and tasks whose
expected attempt count is enormous take a distributionally equivalent
shortcut (geometric attempt count plus a Gaussian total for the failed
attempts) so heavy-tailed sizes stay tractable.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import special

from . import rng
from .analytic import ExpectedTime, TimeClass, expected_restart_time
from .dist import Distribution, compare_tails
from .procgen import MarkedWindow, MarkovRenewalSpec

DEFAULT_ATTEMPT_CAP = 1_000_000_000
# Expected attempts above this use the geometric/Gaussian shortcut.
APPROX_ATTEMPTS_THRESHOLD = 1e5


class PathologicalIterationError(RuntimeError):
    """Attempt cap exceeded; the iteration is diagnosed, not truncated."""

    def __init__(self, index: int, cap: float):
        super().__init__(f"pathological iteration at index {index}: attempt cap {cap:g} exceeded")
        self.index = index
        self.cap = cap


@dataclass(frozen=True)
class RestartIterationRecord:
    n: int
    ideal: float
    failures: float
    actual: float
    state: object = None
    regime: int | None = None
    approximated: bool = False

    def __post_init__(self):
        if self.actual < self.ideal and not math.isnan(self.actual):
            raise ValueError("actual time cannot be below ideal time")


@dataclass(frozen=True)
class EfficiencyEstimate:
    ratio: float
    n_iterations: int
    window_ratios: tuple
    converged: bool
    trend: str  # Stable | Decreasing | Increasing

    def __post_init__(self):
        if not (0.0 <= self.ratio <= 1.0):
            raise ValueError("efficiency ratio must lie in [0, 1]")


def run_restart_iteration(size, marks, attempt_cap=DEFAULT_ATTEMPT_CAP, n: int = 0):
    """One task: draw marks until the first strictly exceeds ``size``.

    ``marks`` is an iterator of mark values (e.g. ``mark_iter(law, stream)``).
    """
    if size <= 0:
        raise ValueError("size must be positive")
    wasted = 0.0
    failures = 0
    for mark in marks:
        if mark > size:
            return RestartIterationRecord(n=n, ideal=float(size), failures=failures,
                                          actual=wasted + float(size))
        wasted += float(mark)
        failures += 1
        if attempt_cap is not None and failures >= attempt_cap:
            raise PathologicalIterationError(n, attempt_cap)
    raise PathologicalIterationError(n, failures)


def mark_iter(law: Distribution, stream):
    while True:
        yield law.sample(stream)


def _approx_tasks(sizes, points, law, seed, replication, attempt_cap, offsets=0):
    """Geometric attempt count + Gaussian failed-attempt total per task.

    Distributionally faithful for large attempt counts; flagged in records.
    Returns (failures, actual) aligned with ``sizes``.
    """
    z = np.asarray(sizes, dtype=float)
    q = np.asarray(law.tail(z), dtype=float)
    u1 = rng.keyed_uniform(seed, replication, rng.DOMAIN_APPROX, points, offsets + 1)
    u2 = rng.keyed_uniform(seed, replication, rng.DOMAIN_APPROX, points, offsets + 2)
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        # tau geometric(q): P[tau > k] = (1-q)^k
        tau = np.floor(np.log(u1) / np.log1p(-q)) + 1.0
    tau = np.where(q <= 0.0, np.inf, tau)
    if attempt_cap is not None and np.any(tau > attempt_cap):
        bad = int(np.asarray(points)[np.argmax(tau > attempt_cap)])
        raise PathologicalIterationError(bad, attempt_cap)
    nfail = tau - 1.0
    mu = np.array([float(law.truncated_mean(zz)) for zz in z])
    m2 = np.array([float(law.truncated_second_moment(zz)) for zz in z])
    cdf = 1.0 - q
    with np.errstate(divide="ignore", invalid="ignore"):
        cm = mu / np.maximum(cdf, 1e-300)  # conditional mean of a failed attempt
        cvar = np.maximum(m2 / np.maximum(cdf, 1e-300) - cm * cm, 0.0)
    with np.errstate(over="ignore", invalid="ignore"):
        total = nfail * cm + np.sqrt(nfail * cvar) * special.ndtri(u2)
        total = np.clip(total, 0.0, nfail * z)
    total = np.where(np.isinf(nfail), np.inf, total)
    return nfail, total + z


def simulate_restart_at_points(
    sizes,
    points,
    law: Distribution,
    seed: int,
    replication: int = 0,
    attempt_cap=DEFAULT_ATTEMPT_CAP,
    approx_threshold: float = APPROX_ATTEMPTS_THRESHOLD,
    attempt_offsets=None,
):
    """Vectorized restart for tasks at explicit point indices.

    Mark i of the task at point n is keyed by (seed, replication, MARK, n, i),
    so every exact iteration is auditable draw by draw.  ``attempt_offsets``
    shifts each task's attempt indices (task repetition draws fresh marks
    from a disjoint range of the same lane).  Returns
    (failures, actual, approximated) arrays aligned with ``sizes``.
    """
    sizes = np.asarray(sizes, dtype=float)
    points = np.asarray(points, dtype=np.int64)
    if attempt_offsets is None:
        attempt_offsets = np.zeros(len(sizes), dtype=np.int64)
    attempt_offsets = np.asarray(attempt_offsets, dtype=np.int64)
    n = len(sizes)
    failures = np.zeros(n)
    actual = np.zeros(n)
    approximated = np.zeros(n, dtype=bool)

    with np.errstate(divide="ignore", over="ignore"):
        expected_attempts = 1.0 / np.asarray(law.tail(sizes), dtype=float)
    heavy = expected_attempts > approx_threshold
    if np.any(heavy):
        idx = np.nonzero(heavy)[0]
        nfail, act = _approx_tasks(
            sizes[idx], points[idx], law, seed, replication, attempt_cap,
            offsets=attempt_offsets[idx],
        )
        failures[idx] = nfail
        actual[idx] = act
        approximated[idx] = True

    active = np.nonzero(~heavy)[0]
    consumed = np.zeros(len(active), dtype=np.int64)
    wasted = np.zeros(len(active))
    batch = 8
    while len(active):
        attempt_idx = (
            attempt_offsets[active][:, None] + consumed[:, None]
            + np.arange(1, batch + 1)[None, :]
        )
        u = rng.keyed_uniform(
            seed, replication, rng.DOMAIN_MARK, points[active][:, None], attempt_idx
        )
        marks = np.asarray(law.quantile(u), dtype=float)
        success = marks > sizes[active][:, None]
        first = np.argmax(success, axis=1)
        hit = success[np.arange(len(active)), first]
        prefix = np.cumsum(marks, axis=1)

        done = np.nonzero(hit)[0]
        if len(done):
            d_idx = active[done]
            j = first[done]
            failures[d_idx] = consumed[done] + j
            pre = np.where(j > 0, prefix[done, np.maximum(j - 1, 0)], 0.0)
            actual[d_idx] = wasted[done] + pre + sizes[d_idx]

        cont = np.nonzero(~hit)[0]
        if len(cont):
            wasted = wasted[cont] + prefix[cont, -1]
            consumed = consumed[cont] + batch
            active = active[cont]
            if attempt_cap is not None and int(consumed.min()) >= attempt_cap:
                worst = int(points[active[np.argmin(consumed)]])
                raise PathologicalIterationError(worst, attempt_cap)
        else:
            active = active[:0]
        batch = min(batch * 2, 4096)

    return failures, actual, approximated


def simulate_restart_sizes(sizes, law, seed, replication=0, point_offset=0, **kw):
    points = np.arange(len(sizes), dtype=np.int64) + point_offset
    return simulate_restart_at_points(sizes, points, law, seed, replication, **kw)


def run_restart(
    window: MarkedWindow,
    n_iterations: int,
    attempt_cap=DEFAULT_ATTEMPT_CAP,
    approx_threshold: float = APPROX_ATTEMPTS_THRESHOLD,
):
    """Restart every inter-arrival of the window in sequence."""
    window = window.extended(n_iterations)
    sizes = window.sizes[:n_iterations]
    failures = np.zeros(n_iterations)
    actual = np.zeros(n_iterations)
    approximated = np.zeros(n_iterations, dtype=bool)

    law_index = (
        window.law_index[:n_iterations]
        if window.law_index is not None
        else np.zeros(n_iterations, dtype=np.intp)
    )
    for t in np.unique(law_index):
        sel = np.nonzero(law_index == t)[0]
        f, a, ap = simulate_restart_at_points(
            sizes[sel], sel, window.mark_laws[t], window.seed, window.replication,
            attempt_cap=attempt_cap, approx_threshold=approx_threshold,
        )
        failures[sel] = f
        actual[sel] = a
        approximated[sel] = ap

    records = []
    for i in range(n_iterations):
        state = None
        if window.state_labels is not None and window.mrp_spec is not None:
            state = window.mrp_spec.states[window.state_labels[i]]
        records.append(
            RestartIterationRecord(
                n=i, ideal=float(sizes[i]), failures=float(failures[i]),
                actual=float(actual[i]), state=state, regime=window.regime,
                approximated=bool(approximated[i]),
            )
        )
    return records


# ---------------------------------------------------------------------------
# Efficiency estimation


def efficiency_from_sums(ideal, actual, tolerance: float = 0.01) -> EfficiencyEstimate:
    """Running-ratio estimate with dyadic-window convergence diagnostics."""
    ideal = np.asarray(ideal, dtype=float)
    actual = np.asarray(actual, dtype=float)
    n = len(ideal)
    if n == 0:
        raise ValueError("no records")
    cum_i = np.cumsum(ideal)
    cum_a = np.cumsum(actual)

    def ratio_at(k):
        a = cum_a[k - 1]
        return float(cum_i[k - 1] / a) if math.isfinite(a) and a > 0 else 0.0

    ws = (max(n // 4, 1), max(n // 2, 1), n)
    window_ratios = tuple(ratio_at(k) for k in ws)
    r1, r2, r3 = window_ratios
    converged = r3 > 0 and abs(r3 - r2) / r3 < tolerance
    if r1 - r2 > tolerance * max(r1, 1e-300) and r2 - r3 > tolerance * max(r2, 1e-300):
        trend = "Decreasing"
    elif r2 - r1 > tolerance * max(r1, 1e-300) and r3 - r2 > tolerance * max(r2, 1e-300):
        trend = "Increasing"
    else:
        trend = "Stable"
    return EfficiencyEstimate(
        ratio=min(ratio_at(n), 1.0), n_iterations=n,
        window_ratios=window_ratios, converged=bool(converged), trend=trend,
    )


def efficiency(records, tolerance: float = 0.01) -> EfficiencyEstimate:
    return efficiency_from_sums(
        [r.ideal for r in records], [r.actual for r in records], tolerance
    )


# ---------------------------------------------------------------------------
# Markov renewal analytics


@dataclass(frozen=True)
class MrpEfficiency:
    numerator: ExpectedTime  # stationary mean ideal time per transition
    denominator: ExpectedTime  # stationary mean actual time per transition
    ratio: float
    slow_pairs: tuple = ()


def mrp_efficiency(spec: MarkovRenewalSpec) -> MrpEfficiency:
    """Stationary ideal/actual ratio of a Markov renewal restart system.

    A slow pair (size tail dominating mark tail on some positive-probability
    transition) forces an infinite stationary actual time, hence ratio 0.
    """
    pi = spec.stationary()
    slow = tuple(
        (i, j)
        for (i, j) in spec.transition_pairs()
        if compare_tails(spec.size_laws[(i, j)], spec.mark_laws[(i, j)]).first_heavier
    )
    num = 0.0
    for (i, j) in spec.transition_pairs():
        num += pi[i] * spec.transition[i, j] * spec.size_laws[(i, j)].mean()
    numerator = ExpectedTime(num, TimeClass.FINITE_NUMERIC, 0.0)
    if slow:
        return MrpEfficiency(
            numerator, ExpectedTime(math.inf, TimeClass.INFINITE_PROVED), 0.0, slow
        )
    den = 0.0
    den_err = 0.0
    for (i, j) in spec.transition_pairs():
        w = pi[i] * spec.transition[i, j]
        et = expected_restart_time(spec.size_laws[(i, j)], spec.mark_laws[(i, j)])
        if not et.finite:
            return MrpEfficiency(
                numerator, ExpectedTime(math.inf, et.classification), 0.0, slow
            )
        den += w * et.value
        den_err += w * (et.abs_error_bound or 0.0)
    return MrpEfficiency(
        numerator,
        ExpectedTime(den, TimeClass.FINITE_NUMERIC, den_err),
        num / den,
        slow,
    )
