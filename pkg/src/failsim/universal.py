"""Universal-checkpoint detection for exponential failure marks.

Every point n has a single-hop target kappa_n: the furthest point covered
by its winning attempt.  The count N_n of earlier points whose hop jumps
past n is, for exponential marks, a Markov chain; points with N_n = 0 are
universal — every trajectory started earlier passes through them.

The transition kernel used here is Binomial(k + 1, e^{-lambda t}) mixed
over the inter-arrival law: the k pending trajectories and the hop
launched at the current point each survive the next interval independently
with probability e^{-lambda t} by memorylessness.  Its rows are validated
empirically against simulated transition counts.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate, special

from . import rng
from .dist import Distribution, Exponential
from .procgen import MarkedWindow
from .restart import DEFAULT_ATTEMPT_CAP, PathologicalIterationError

DEFAULT_SCAN_CAP = 1_000_000


class MarkLawError(ValueError):
    """The N-process machinery requires exponential marks."""


def _require_exponential(law) -> Exponential:
    if not isinstance(law, Exponential):
        raise MarkLawError("universal-checkpoint analysis requires exponential marks")
    return law


@dataclass(frozen=True)
class TrajectoryMap:
    kappa: np.ndarray  # single-hop target per point
    n_points: int

    def __post_init__(self):
        if np.any(self.kappa[: self.n_points] < np.arange(self.n_points) + 1):
            raise ValueError("kappa must advance by at least one point")

    def trajectory(self, m: int, stop: int) -> list[int]:
        """Points visited starting at m until reaching index >= stop."""
        path = [m]
        while path[-1] < stop and path[-1] < self.n_points:
            path.append(int(self.kappa[path[-1]]))
        return path


@dataclass(frozen=True)
class NProcess:
    values: np.ndarray
    lookback: int
    first_index: int  # values[i] is N_{first_index + i}
    universal_indices: np.ndarray
    max_hop: int
    boundary_ok: bool  # no hop observed longer than the lookback


def compute_kappa(window: MarkedWindow, n: int, attempt_cap=DEFAULT_ATTEMPT_CAP,
                  scan_cap: int = DEFAULT_SCAN_CAP) -> int:
    """Single-hop target of point n (scalar reference implementation)."""
    _require_exponential(window.mark_law_for(0))
    k = compute_all_kappas(window, n + 1, attempt_cap=attempt_cap, scan_cap=scan_cap)
    return int(k[n])


def compute_all_kappas(
    window: MarkedWindow,
    n_points: int,
    attempt_cap=DEFAULT_ATTEMPT_CAP,
    scan_cap: int = DEFAULT_SCAN_CAP,
) -> np.ndarray:
    """Vectorized kappa for points 0..n_points-1 of a renewal window."""
    if window.kind != "renewal":
        raise ValueError("kappa computation runs on renewal windows")
    law = _require_exponential(window.mark_law_for(0))
    seed, rep = window.seed, window.replication

    def size_at(point_arr):
        u = rng.keyed_uniform(seed, rep, rng.DOMAIN_SIZE, np.asarray(point_arr) + 1)
        return np.asarray(window.size_law.quantile(u), dtype=float)

    pts = np.arange(n_points, dtype=np.int64)
    d_start = size_at(pts)

    # winning mark per point, batched doubling scan over each mark lane
    win = np.zeros(n_points)
    active = pts.copy()
    consumed = np.zeros(n_points, dtype=np.int64)
    batch = 16
    while len(active):
        idx = consumed[active][:, None] + np.arange(1, batch + 1)[None, :]
        u = rng.keyed_uniform(seed, rep, rng.DOMAIN_MARK, active[:, None], idx)
        marks = np.asarray(law.quantile(u), dtype=float)
        success = marks > d_start[active][:, None]
        first = np.argmax(success, axis=1)
        hit = success[np.arange(len(active)), first]
        done = np.nonzero(hit)[0]
        if len(done):
            win[active[done]] = marks[done, first[done]]
        cont = np.nonzero(~hit)[0]
        if len(cont):
            consumed[active[cont]] += batch
            if attempt_cap is not None and consumed[active[cont]].min() >= attempt_cap:
                raise PathologicalIterationError(int(active[cont][0]), attempt_cap)
        active = active[cont] if len(cont) else active[:0]
        batch = min(batch * 2, 4096)

    # inclusive coverage scan: kappa_n = largest k with X_k - X_n <= win
    kappa = pts + 1
    covered = d_start.copy()
    active = pts.copy()
    chunk = 4
    while len(active):
        cand = kappa[active][:, None] + np.arange(chunk)[None, :]
        sizes = size_at(cand)
        csum = covered[active][:, None] + np.cumsum(sizes, axis=1)
        cond = csum <= win[active][:, None]
        add = cond.sum(axis=1)
        sel = np.arange(len(active))
        covered[active] = np.where(add > 0, csum[sel, np.maximum(add - 1, 0)], covered[active])
        kappa[active] += add
        if np.any((kappa - pts)[active] > scan_cap):
            raise RuntimeError(f"scan cap {scan_cap} exceeded")
        active = active[add == chunk]
        chunk = min(chunk * 2, 4096)
    return kappa


def compute_n_process(window: MarkedWindow, n_points: int, lookback: int,
                      kappa: np.ndarray | None = None) -> NProcess:
    """N_n = #{m in [n - lookback, n): kappa_m > n} for n in [lookback, n_points)."""
    if lookback >= n_points:
        raise ValueError("lookback must be smaller than the window span")
    if kappa is None:
        kappa = compute_all_kappas(window, n_points)
    kappa = np.asarray(kappa[:n_points])
    m = np.arange(n_points)
    # m contributes +1 to every n in [m + 1, min(kappa_m - 1, m + lookback)]
    lo = m + 1
    hi = np.minimum(kappa - 1, m + lookback)
    diff = np.zeros(n_points + 1, dtype=np.int64)
    valid = hi >= lo
    np.add.at(diff, lo[valid], 1)
    np.add.at(diff, np.minimum(hi[valid] + 1, n_points), -1)
    counts = np.cumsum(diff[:-1])
    values = counts[lookback:n_points]
    universal = np.nonzero(values == 0)[0] + lookback
    max_hop = int((kappa - m).max())
    return NProcess(
        values=values, lookback=lookback, first_index=lookback,
        universal_indices=universal, max_hop=max_hop,
        boundary_ok=max_hop <= lookback,
    )


def verify_universal(kappa: np.ndarray, n: int, lookback: int) -> bool:
    """Brute force: every trajectory started in [n - lookback, n) visits n.

    reach[m] is decided right-to-left with memoization on the hop map.
    """
    reach: dict[int, bool] = {n: True}

    def hits(m: int) -> bool:
        seen = []
        cur = m
        while cur not in reach:
            if cur > n:
                break
            seen.append(cur)
            cur = int(kappa[cur])
        ok = reach.get(cur, False)
        for s in seen:
            reach[s] = ok
        return ok

    return all(hits(m) for m in range(max(n - lookback, 0), n))


# ---------------------------------------------------------------------------
# Analytic kernel of the N-chain


def analytic_n_kernel(d: Distribution, lam: float, k: int, j: int) -> float:
    """P[N_n = j | N_{n-1} = k] for exponential marks of rate ``lam``.

    Binomial(k+1, e^{-lam t}) survival of the k pending trajectories plus
    the freshly launched hop, mixed over the inter-arrival law.
    """
    if k < 0 or j < 0:
        raise ValueError("k and j must be nonnegative")
    if j > k + 1:
        return 0.0
    comb = special.comb(k + 1, j, exact=True)

    def g(w):
        t = float(d.quantile(w))
        s = math.exp(-lam * t)
        return comb * s**j * (1.0 - s) ** (k + 1 - j)

    val, _ = integrate.quad(g, 0.0, 1.0, limit=200, epsabs=1e-12, epsrel=1e-12)
    return float(min(max(val, 0.0), 1.0))


def kernel_row(d: Distribution, lam: float, k: int) -> np.ndarray:
    return np.array([analytic_n_kernel(d, lam, k, j) for j in range(k + 2)])


def stationary_n_distribution(d: Distribution, lam: float, truncation: int = 200,
                              tol: float = 1e-12, max_iter: int = 100000) -> np.ndarray:
    """Stationary law of the N-chain on a truncated state space."""
    P = np.zeros((truncation, truncation))
    for k in range(truncation):
        row = kernel_row(d, lam, k)[:truncation]
        P[k, : len(row)] = row
        P[k] /= P[k].sum()
    pi = np.full(truncation, 1.0 / truncation)
    for _ in range(max_iter):
        nxt = pi @ P
        nxt /= nxt.sum()
        if np.max(np.abs(nxt - pi)) < tol:
            return nxt
        pi = nxt
    raise RuntimeError("stationary iteration for the N-chain did not converge")


def universal_growth(nproc: NProcess, n_segments: int = 20):
    """Cumulative universal-checkpoint count vs window length, with a
    least-squares linear fit (slope, intercept, r_squared)."""
    span = len(nproc.values)
    xs = np.linspace(span / n_segments, span, n_segments).astype(int)
    counts = np.searchsorted(nproc.universal_indices - nproc.first_index, xs)
    slope, intercept = np.polyfit(xs, counts, 1)
    pred = slope * xs + intercept
    ss_res = float(np.sum((counts - pred) ** 2))
    ss_tot = float(np.sum((counts - counts.mean()) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    return float(slope), float(intercept), r2, xs, counts
