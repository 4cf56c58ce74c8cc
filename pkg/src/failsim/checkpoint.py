"""Sequential checkpointing engine over a renewal window.

One iteration ("hop") repeats the task at the current checkpoint until an
attempt strictly exceeds the current inter-arrival; the winning attempt's
duration is walked forward along the axis and every checkpoint it covers is
secured.  The first hop secures a checkpoint hit exactly on the boundary
(inclusive rule); later hops require strict coverage — the two tie rules
differ only on null sets for continuous laws.

Bulk distributional sampling of the landed interval is vectorized across
replications (`simulate_hops`), which is what the limit-law and
inspection-paradox diagnostics run on.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import rng
from .dist import Distribution, Exponential
from .procgen import MarkedWindow
from .restart import (
    DEFAULT_ATTEMPT_CAP,
    EfficiencyEstimate,
    PathologicalIterationError,
    efficiency_from_sums,
)

DEFAULT_SCAN_CAP = 1_000_000


class ScanCapError(RuntimeError):
    """A single winning attempt covered more checkpoints than the cap allows."""


@dataclass(frozen=True)
class CheckpointIterationRecord:
    n: int
    start_index: int
    end_index: int
    attempts: int
    ideal: float  # X_end - X_start
    actual: float  # sum of every drawn mark, winner included
    overshoot: float  # winning mark - first inter-arrival

    def __post_init__(self):
        if self.end_index < self.start_index + 1:
            raise ValueError("a hop must advance at least one checkpoint")
        if self.overshoot <= 0:
            raise ValueError("overshoot must be positive")


def run_checkpoint_iteration(
    window: MarkedWindow,
    start_index: int,
    n: int = 0,
    inclusive: bool | None = None,
    attempt_cap=DEFAULT_ATTEMPT_CAP,
    scan_cap: int = DEFAULT_SCAN_CAP,
):
    """One hop from checkpoint ``start_index``; returns (record, window).

    The returned window may be an extension of the input (same realization,
    more points).
    """
    if inclusive is None:
        inclusive = start_index == 0
    window = window.extended(start_index + 2)
    d_start = float(window.sizes[start_index])
    law = window.mark_law_for(start_index)

    total = 0.0
    attempts = 0
    win_mark = None
    batch = 16
    while win_mark is None:
        u = rng.lane_uniforms(
            window.seed, window.replication, rng.DOMAIN_MARK, start_index, attempts + 1, batch
        )
        marks = np.asarray(law.quantile(u), dtype=float)
        over = np.nonzero(marks > d_start)[0]
        if len(over):
            j = int(over[0])
            total += float(marks[: j + 1].sum())
            attempts += j + 1
            win_mark = float(marks[j])
        else:
            total += float(marks.sum())
            attempts += batch
            if attempt_cap is not None and attempts >= attempt_cap:
                raise PathologicalIterationError(start_index, attempt_cap)
            batch = min(batch * 2, 4096)

    # walk the winning duration forward and secure every covered checkpoint
    end = start_index + 1
    covered = d_start
    while True:
        window = window.extended(end + 1)
        nxt = covered + float(window.sizes[end])
        ok = nxt <= win_mark if inclusive else nxt < win_mark
        if not ok:
            break
        covered = nxt
        end += 1
        if end - start_index > scan_cap:
            raise ScanCapError(f"hop from {start_index} exceeded scan cap {scan_cap}")

    record = CheckpointIterationRecord(
        n=n, start_index=start_index, end_index=end, attempts=attempts,
        ideal=covered, actual=total, overshoot=win_mark - d_start,
    )
    return record, window


def run_checkpointing(
    window: MarkedWindow,
    n_iterations: int,
    attempt_cap=DEFAULT_ATTEMPT_CAP,
    scan_cap: int = DEFAULT_SCAN_CAP,
):
    """Chain hops: iteration k starts where iteration k-1 landed.

    Same draws and tie rules as `run_checkpoint_iteration`, but the window
    is grown geometrically and coverage is resolved by binary search on the
    cached point positions, keeping the whole chain near-linear.
    """
    window = window.extended(max(2 * n_iterations, 64))
    points = window.points
    law = window.mark_law_for(0)
    records = []
    start = 0
    for k in range(n_iterations):
        d_start = float(window.sizes[start])
        total = 0.0
        attempts = 0
        win_mark = None
        batch = 16
        while win_mark is None:
            u = rng.lane_uniforms(
                window.seed, window.replication, rng.DOMAIN_MARK, start, attempts + 1, batch
            )
            marks = np.asarray(law.quantile(u), dtype=float)
            over = np.nonzero(marks > d_start)[0]
            if len(over):
                j = int(over[0])
                total += float(marks[: j + 1].sum())
                attempts += j + 1
                win_mark = float(marks[j])
            else:
                total += float(marks.sum())
                attempts += batch
                if attempt_cap is not None and attempts >= attempt_cap:
                    raise PathologicalIterationError(start, attempt_cap)
                batch = min(batch * 2, 4096)

        target = points[start] + win_mark
        while target >= points[-1]:
            window = window.extended(2 * window.n_points)
            points = window.points
        side = "right" if start == 0 else "left"  # inclusive first hop
        end = int(np.searchsorted(points, target, side=side)) - 1
        end = max(end, start + 1)
        if end - start > scan_cap:
            raise ScanCapError(f"hop from {start} exceeded scan cap {scan_cap}")
        records.append(
            CheckpointIterationRecord(
                n=k, start_index=start, end_index=end, attempts=attempts,
                ideal=float(points[end] - points[start]), actual=total,
                overshoot=win_mark - d_start,
            )
        )
        start = end
    return records, window


# ---------------------------------------------------------------------------
# Vectorized multi-replication hop engine


def simulate_hops(
    d: Distribution,
    l: Distribution,
    n_hops: int,
    seed: int,
    n_reps: int,
    first_rep: int = 0,
    attempt_cap=DEFAULT_ATTEMPT_CAP,
    scan_cap: int = DEFAULT_SCAN_CAP,
):
    """Run ``n_hops`` chained checkpoint hops in each of ``n_reps`` fresh
    replications; sizes and marks come from the same keyed lanes as
    windowed engines, so results agree with `run_checkpointing` per rep.

    Returns a dict of arrays for the final hop: ``end_index``, ``d_end``
    (inter-arrival at the landed checkpoint), ``overshoot``, ``ideal``,
    ``actual``, ``attempts``.
    """
    reps = np.arange(first_rep, first_rep + n_reps, dtype=np.int64)
    start = np.zeros(n_reps, dtype=np.int64)

    def size_at(rep_arr, point_arr):
        u = rng.keyed_uniform(seed, rep_arr, rng.DOMAIN_SIZE, point_arr + 1)
        return np.asarray(d.quantile(u), dtype=float)

    out = {}
    for hop in range(n_hops):
        inclusive = hop == 0
        d_start = size_at(reps, start)

        win = np.zeros(n_reps)
        attempts = np.zeros(n_reps, dtype=np.int64)
        total = np.zeros(n_reps)
        active = np.arange(n_reps)
        consumed = np.zeros(n_reps, dtype=np.int64)
        batch = 16
        while len(active):
            idx = consumed[active][:, None] + np.arange(1, batch + 1)[None, :]
            u = rng.keyed_uniform(
                seed, reps[active][:, None], rng.DOMAIN_MARK, start[active][:, None], idx
            )
            marks = np.asarray(l.quantile(u), dtype=float)
            success = marks > d_start[active][:, None]
            first = np.argmax(success, axis=1)
            hit = success[np.arange(len(active)), first]
            prefix = np.cumsum(marks, axis=1)

            done = np.nonzero(hit)[0]
            if len(done):
                a_idx = active[done]
                j = first[done]
                win[a_idx] = marks[done, j]
                attempts[a_idx] = consumed[a_idx] + j + 1
                total[a_idx] += prefix[done, j]
            cont = np.nonzero(~hit)[0]
            if len(cont):
                c_idx = active[cont]
                total[c_idx] += prefix[cont, -1]
                consumed[c_idx] += batch
                if attempt_cap is not None and consumed[c_idx].min() >= attempt_cap:
                    raise PathologicalIterationError(int(c_idx[0]), attempt_cap)
            active = active[cont] if len(cont) else active[:0]
            batch = min(batch * 2, 4096)

        # secure checkpoints covered by the winning duration
        end = start + 1
        covered = d_start.copy()
        active = np.arange(n_reps)
        chunk = 4
        while len(active):
            pts = end[active][:, None] + np.arange(chunk)[None, :]
            sizes = size_at(reps[active][:, None], pts)
            csum = covered[active][:, None] + np.cumsum(sizes, axis=1)
            wv = win[active][:, None]
            cond = csum <= wv if inclusive else csum < wv
            add = cond.sum(axis=1)  # cond is prefix-true since csum increases
            sel = np.arange(len(active))
            gained = np.where(add > 0, csum[sel, np.maximum(add - 1, 0)], covered[active])
            covered[active] = gained
            end[active] += add
            full = add == chunk
            if np.any((end - start)[active] > scan_cap):
                raise ScanCapError(f"scan cap {scan_cap} exceeded")
            active = active[full]
            chunk = min(chunk * 2, 4096)

        out = {
            "end_index": end.copy(),
            "d_end": size_at(reps, end),
            "overshoot": win - d_start,
            "ideal": covered.copy(),
            "actual": total.copy(),
            "attempts": attempts.copy(),
        }
        start = end
    return out


# ---------------------------------------------------------------------------
# Total-lifetime oracle and the landed-interval law


def sample_beta(d: Distribution, t: float, stream) -> float:
    """Inter-arrival of a fresh renewal sequence covering time ``t``."""
    if t <= 0:
        raise ValueError("t must be positive")
    s = 0.0
    while True:
        x = d.sample(stream)
        if s + x >= t:
            return x
        s += x


def sample_beta_n(d: Distribution, ts, stream) -> np.ndarray:
    """Vectorized `sample_beta` over an array of cover times."""
    ts = np.asarray(ts, dtype=float)
    out = np.zeros(len(ts))
    partial = np.zeros(len(ts))
    active = np.nonzero(ts > 0)[0]
    if len(active) < len(ts):
        raise ValueError("t must be positive")
    while len(active):
        draws = np.asarray(d.quantile(stream.uniforms(len(active))), dtype=float)
        covers = partial[active] + draws >= ts[active]
        out[active[covers]] = draws[covers]
        partial[active] += draws
        active = active[~covers]
    return out


def sample_first_interval_after_shift(
    d: Distribution,
    l: Distribution,
    n_hops: int,
    seed: int,
    replication: int = 0,
    oracle_stream=None,
):
    """Inter-arrival at the checkpoint landed after ``n_hops`` hops.

    With ``oracle_stream`` set the engine is bypassed: the overshoot is
    drawn from its known law (exponential marks: exp(rate)) and pushed
    through the total-lifetime construction, giving an independent oracle
    for the same law.
    """
    if oracle_stream is not None:
        if not isinstance(l, Exponential):
            raise ValueError("the overshoot law shortcut requires exponential marks")
        z = Exponential(l.rate).sample(oracle_stream)
        return sample_beta(d, z, oracle_stream)
    out = simulate_hops(d, l, n_hops, seed, 1, first_rep=replication)
    return float(out["d_end"][0])


def checkpoint_efficiency(records, tolerance: float = 0.01, burn_in: int | None = None):
    """Efficiency estimate; with ``burn_in`` also the post-burn-in ratio of
    separately averaged ideal and actual (the limit-law companion)."""
    est = efficiency_from_sums(
        [r.ideal for r in records], [r.actual for r in records], tolerance
    )
    if burn_in is None:
        return est
    tail = records[burn_in:]
    if not tail:
        raise ValueError("burn-in leaves no records")
    companion = float(np.mean([r.ideal for r in tail]) / np.mean([r.actual for r in tail]))
    return est, companion


def estimate_limit_moments(d: Distribution, l: Distribution, n_samples: int, stream):
    """Monte Carlo moments of the landed-interval limit law.

    Exponential marks only: hop-1 already samples the limit (the landed
    interval is total lifetime at an exp overshoot, independent of history).
    Returns means with standard errors for D_inf, tau_inf, nu_inf.
    """
    if not isinstance(l, Exponential):
        raise ValueError("limit-law shortcuts require exponential marks")
    z = np.asarray(Exponential(l.rate).quantile(stream.uniforms(n_samples)), dtype=float)
    d_inf = sample_beta_n(d, z, stream)

    # tau_inf: geometric attempt count against an independent D_inf draw
    tail = np.asarray(l.tail(d_inf), dtype=float)
    u = stream.uniforms(n_samples)
    tau = np.floor(np.log(u) / np.log1p(-tail)) + 1.0

    # nu_inf: checkpoints covered by the winning overshoot past D_inf
    z2 = np.asarray(Exponential(l.rate).quantile(stream.uniforms(n_samples)), dtype=float)
    nu = np.ones(n_samples)
    partial = np.zeros(n_samples)
    active = np.arange(n_samples)
    while len(active):
        draws = np.asarray(d.quantile(stream.uniforms(len(active))), dtype=float)
        fits = partial[active] + draws < z2[active]
        nu[active[fits]] += 1.0
        partial[active] += draws
        active = active[fits]

    def mse(x):
        return float(np.mean(x)), float(np.std(x) / math.sqrt(len(x)))

    return {
        "E_D_infinity": mse(d_inf),
        "E_tau_infinity": mse(tau),
        "E_nu_infinity": mse(nu),
    }
