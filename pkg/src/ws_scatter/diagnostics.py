"""Norm series, power-law fitting, and inequality spot checks.

Time-tagged norm samples are held as DecaySeries; fit_decay performs the
log-log least squares that turns a series into a (prefactor, exponent)
pair.  The dyadic-block estimator converts per-block factor norms into a
bound for a weighted space-time norm, with its closed-form constant.
"""

import warnings
from dataclasses import dataclass, field

import numpy as np

from .grids import Grid
from .operators import (WaveState, free_schrodinger, lebesgue_norm,
                        sobolev_norm, wave_propagate, wave_propagate_sourced,
                        wave_energy, gradient)

__all__ = [
    "DecaySeries", "DecayFit", "fit_decay", "spacetime_norm",
    "dyadic_norm_bound", "dyadic_block_constant", "strichartz_check",
    "wave_strichartz_check", "free_wave_decay_check", "admissible_pair",
]

_VALUE_FLOOR = 1e-30


@dataclass(frozen=True)
class DecaySeries:
    """Nonnegative norm samples at strictly increasing times >= 1."""
    times: np.ndarray
    values: np.ndarray
    label: str = ""

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        v = np.asarray(self.values, dtype=float)
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "values", v)
        if t.shape != v.shape or t.ndim != 1:
            raise ValueError("times and values must be 1D arrays of equal length")
        if len(t) and (np.any(np.diff(t) <= 0) or t[0] < 1.0):
            raise ValueError("times must be strictly increasing and >= 1")
        if np.any(v < 0) or not np.all(np.isfinite(v)):
            raise ValueError("values must be finite and nonnegative")

    def window(self, t_lo: float, t_hi: float) -> "DecaySeries":
        sel = (self.times >= t_lo) & (self.times <= t_hi)
        return DecaySeries(self.times[sel], self.values[sel], self.label)


@dataclass(frozen=True)
class DecayFit:
    """Power law value ~ prefactor * t^exponent fitted over a window."""
    exponent: float
    prefactor: float
    r_squared: float
    window: tuple


def fit_decay(series: DecaySeries, window: tuple | None = None) -> DecayFit:
    """Ordinary least squares on (ln t, ln value).

    Zero values are floored at 1e-30 with a warning; the fit is
    deterministic, so refitting the same series reproduces the output.
    """
    if window is not None:
        series = series.window(*window)
    t, v = series.times, series.values
    if len(t) < 2:
        raise ValueError("need at least two samples to fit a power law")
    if np.any(v <= 0.0):
        warnings.warn(f"fit_decay({series.label!r}): flooring nonpositive "
                      f"values at {_VALUE_FLOOR:g}")
        v = np.maximum(v, _VALUE_FLOOR)
    lt, lv = np.log(t), np.log(v)
    slope, intercept = np.polyfit(lt, lv, 1)
    pred = slope * lt + intercept
    ss_res = float(np.sum((lv - pred) ** 2))
    ss_tot = float(np.sum((lv - lv.mean()) ** 2))
    r2 = 1.0 if ss_tot == 0.0 else max(0.0, 1.0 - ss_res / ss_tot)
    return DecayFit(float(slope), float(np.exp(intercept)), r2,
                    (float(t[0]), float(t[-1])))


def spacetime_norm(times, space_norms, q: float,
                   t_lo: float, t_hi: float | None = None) -> float:
    """L^q-in-time norm of precomputed spatial norms over [t_lo, t_hi].

    Trapezoidal quadrature of |f(s)|^q with log-linear interpolation at the
    window endpoints; q = inf gives the supremum of the covered samples.
    """
    t = np.asarray(times, dtype=float)
    v = np.asarray(space_norms, dtype=float)
    if t_hi is None:
        t_hi = float(t[-1])
    if t_lo < t[0] - 1e-12 or t_hi > t[-1] + 1e-12 or t_lo >= t_hi:
        raise ValueError(
            f"window [{t_lo:g}, {t_hi:g}] not covered by samples "
            f"[{t[0]:g}, {t[-1]:g}]")
    if np.isinf(q):
        sel = (t >= t_lo) & (t <= t_hi)
        return float(v[sel].max()) if sel.any() else 0.0
    grid_t = np.unique(np.concatenate([[t_lo], t[(t > t_lo) & (t < t_hi)], [t_hi]]))
    vals = np.interp(np.log(grid_t), np.log(t), v)
    return float(np.trapezoid(vals ** q, grid_t) ** (1.0 / q))


def dyadic_block_constant(q: float, n: int, lam: float,
                          rho: float, mu: float) -> float:
    """Closed-form geometric-sum constant of the dyadic block estimate."""
    gap = n * lam + rho - mu
    if gap <= 0.0:
        raise ValueError(f"need n*lambda + rho > mu, got gap {gap:g}")
    if np.isinf(q):
        return 1.0
    return float((1.0 - 2.0 ** (-q * gap)) ** (-1.0 / q))


def _lq_time_norm(t, v, q, a, b):
    if a >= b:
        return 0.0
    return spacetime_norm(t, v, q, a, b)


def dyadic_norm_bound(factors, q: float, q_list, rho: float, lam: float,
                      t_start: float) -> tuple:
    """Dyadic-block estimate for || (prod_k f_k) t^-rho ; L^q([t_start, T]) ||.

    Each factor is a DecaySeries sampled on a common horizon [t_start, T].
    The interval is split into blocks [t 2^j, t 2^(j+1)); on each block the
    product is bounded by Hoelder (1/q = sum 1/q_k + mu, mu >= 0) and the
    block contributions are recombined in l^q.  Returns (estimate, constant)
    where the constant is the closed-form geometric bound for exact power
    law inputs with gauge exponent lam.
    """
    if len(factors) != len(q_list):
        raise ValueError("one exponent per factor required")
    mu = (0.0 if np.isinf(q) else 1.0 / q) - sum(
        0.0 if np.isinf(qk) else 1.0 / qk for qk in q_list)
    if mu < 0.0:
        raise ValueError(f"Hoelder budget violated: mu = {mu:g} < 0")
    n = len(factors)
    const = dyadic_block_constant(q, n, lam, rho, mu)
    t_end = min(float(f.times[-1]) for f in factors)
    blocks = []
    a = t_start
    while a < t_end * (1.0 - 1e-12):
        b = min(2.0 * a, t_end)
        blocks.append((a, b))
        a = b
    contribs = []
    for a, b in blocks:
        prod = 1.0
        for f, qk in zip(factors, q_list):
            prod *= _lq_time_norm(f.times, f.values, qk, a, b)
        # L^(1/mu) norm of t^-rho over the block, analytic
        if mu == 0.0:
            weight = a ** -rho if rho >= 0 else b ** -rho
        else:
            p = 1.0 / mu
            if abs(rho * p - 1.0) < 1e-12:
                weight = (np.log(b) - np.log(a)) ** mu
            else:
                weight = ((b ** (1.0 - rho * p) - a ** (1.0 - rho * p))
                          / (1.0 - rho * p)) ** mu
        contribs.append(prod * weight)
    contribs = np.asarray(contribs)
    if np.isinf(q):
        estimate = float(contribs.max()) if len(contribs) else 0.0
    else:
        estimate = float(np.sum(contribs ** q) ** (1.0 / q))
    return estimate, const


def admissible_pair(q: float, r: float) -> bool:
    """Schrodinger admissibility in 3D: 0 <= 2/q = 3/2 - 3/r <= 1."""
    lhs = 0.0 if np.isinf(q) else 2.0 / q
    rhs = 1.5 - (0.0 if np.isinf(r) else 3.0 / r)
    return abs(lhs - rhs) <= 1e-12 and -1e-12 <= lhs <= 1.0 + 1e-12


def strichartz_check(grid: Grid, u0_batch, q: float, r: float,
                     window: tuple, samples_per_block: int = 16) -> float:
    """Max over the batch of ||U(t)u0; L^q(window, L^r)|| / ||u0||_2.

    The pair (q, r) must be admissible; times are sampled log-uniformly
    with at least samples_per_block points per dyadic block.
    """
    if not admissible_pair(q, r):
        raise ValueError(f"(q, r) = ({q}, {r}) is not an admissible pair")
    t_lo, t_hi = window
    n_blocks = max(1, int(np.ceil(np.log2(t_hi / t_lo))))
    ts = np.geomspace(t_lo, t_hi, samples_per_block * n_blocks + 1)
    best = 0.0
    for u0 in u0_batch:
        norms = np.array([lebesgue_norm(grid, free_schrodinger(grid, u0, t), r)
                          for t in ts])
        val = spacetime_norm(ts, norms, q, t_lo, t_hi)
        best = max(best, val / lebesgue_norm(grid, u0, 2))
    return best


def wave_strichartz_check(grid: Grid, source_fn, t_end: float,
                          steps: int = 64) -> dict:
    """Drive a wave from zero data and compare both sides of the space-time
    estimates ||B; L4L4|| <= C ||source; L4/3 L4/3|| and
    sup(|grad B|_2 v |B_t|_2) <= ||source; L1 L2|| (constant exactly 1).

    Returns the two ratios; a zero source returns zero ratios by convention.
    """
    dt = t_end / steps
    state = WaveState(grid, np.zeros(grid.shape), np.zeros(grid.shape), 0.0)
    ts = [0.0]
    b4 = [0.0]
    grad_or_dot = [0.0]
    s43 = [lebesgue_norm(grid, source_fn(0.0), 4.0 / 3.0)]
    s2 = [lebesgue_norm(grid, source_fn(0.0), 2.0)]
    for i in range(steps):
        t_mid = (i + 0.5) * dt
        state = wave_propagate_sourced(state, dt, source_fn(t_mid))
        ts.append(state.time)
        b4.append(lebesgue_norm(grid, state.a, 4.0))
        gb = gradient(grid, state.a)
        gnorm = np.sqrt(sum(lebesgue_norm(grid, c, 2.0) ** 2 for c in gb))
        grad_or_dot.append(max(gnorm, lebesgue_norm(grid, state.a_dot, 2.0)))
        s43.append(lebesgue_norm(grid, source_fn(state.time), 4.0 / 3.0))
        s2.append(lebesgue_norm(grid, source_fn(state.time), 2.0))
    ts = np.asarray(ts)
    ts[0] = 0.0
    lhs_13 = float(np.trapezoid(np.asarray(b4) ** 4.0, ts) ** 0.25)
    rhs_13 = float(np.trapezoid(np.asarray(s43) ** (4.0 / 3.0), ts) ** 0.75)
    lhs_14 = float(np.max(grad_or_dot))
    rhs_14 = float(np.trapezoid(np.asarray(s2), ts))
    ratio_13 = 0.0 if rhs_13 == 0.0 else lhs_13 / rhs_13
    ratio_14 = 0.0 if rhs_14 == 0.0 else lhs_14 / rhs_14
    return {"l4l4_ratio": ratio_13, "energy_ratio": ratio_14}


def free_wave_decay_check(state: WaveState, r: float, k: int,
                          times, fit_window: tuple | None = None) -> DecayFit:
    """Evolve wave data freely, sample the order-k Sobolev L^r norm, fit."""
    times = np.asarray(times, dtype=float)
    vals = []
    for t in times:
        evolved = wave_propagate(state, t - state.time)
        vals.append(sobolev_norm(evolved.grid, evolved.a, r, k))
    series = DecaySeries(times, np.asarray(vals), label=f"free-wave W^{k}_{r}")
    return fit_decay(series, fit_window)
