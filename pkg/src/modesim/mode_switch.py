"""Mode selection: where single-user beamforming beats multi-user zero forcing.

The rate difference ``g(P) = R_bf(P) - R_zf_sum(P)`` is scanned on a fine
SNR grid and every sign change is refined by bisection, instead of handing
two initial guesses to a general solver: the scan cannot miss a crossing
wider than the grid step. With imperfect CSIT there are at most two
crossings; the single-user mode wins at both SNR extremes.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, replace

import numpy as np

from .channel import ScenarioConfig
from .closed_form import r_bf_delay, r_bf_qd_approx, r_zf_delay, r_zf_qd_approx_sum
from .errors import NumericsError
from .simulate import MonteCarloSpec, simulate_bf, simulate_mmse, simulate_zf

logger = logging.getLogger(__name__)

SCAN_STEP_DB = 0.25

SU = "SU"
MU = "MU"


@dataclass
class SwitchReport:
    """Crossing SNRs of the two rate curves and the winning mode between them."""

    crossings_db: list
    active_mode: list  # [((lo_db, hi_db), "SU"|"MU"), ...] partitioning the range
    method: str  # closed_form | monte_carlo


@dataclass
class RegionGrid:
    """Winning mode over an (axis2 x SNR) grid.

    ``cell_mode[i][j]`` is the mode at ``axis2_grid[i]`` and
    ``axis1_grid[j]`` (axis1 is the SNR axis).
    """

    axis1_name: str
    axis1_grid: list
    axis2_name: str
    axis2_grid: list
    cell_mode: list


def rate_gap_fn(cfg: ScenarioConfig):
    """Return g(snr_db) = BF rate minus ZF sum rate for this scenario,
    using the quantized+delayed approximations, or the delay-only pair when
    the scenario has no feedback bits."""
    if cfg.feedback_bits is None:
        def gap(snr_db: float) -> float:
            c = cfg.at_snr_db(snr_db)
            return r_bf_delay(c) - c.n_users * r_zf_delay(c)
    else:
        def gap(snr_db: float) -> float:
            c = cfg.at_snr_db(snr_db)
            return r_bf_qd_approx(c) - r_zf_qd_approx_sum(c)
    return gap


def find_switching_points(cfg: ScenarioConfig, snr_range_db, tol_db: float = 0.01) -> SwitchReport:
    """Locate every SNR where the SU and MU curves cross.

    Scans at 0.25 dB, refines each sign change by bisection to ``tol_db``,
    and labels the intervals between crossings with the winning mode.
    """
    lo, hi = float(snr_range_db[0]), float(snr_range_db[1])
    if not lo < hi:
        raise ValueError(f"need lo < hi, got ({lo}, {hi})")
    if not tol_db > 0:
        raise ValueError(f"tol_db must be > 0, got {tol_db}")
    gap = rate_gap_fn(cfg)
    grid = np.arange(lo, hi + SCAN_STEP_DB / 2, SCAN_STEP_DB)
    grid[-1] = min(grid[-1], hi)
    values = np.array([gap(p) for p in grid])
    if not np.all(np.isfinite(values)):
        bad = grid[~np.isfinite(values)][0]
        raise NumericsError(f"rate curve is not finite at {bad} dB")

    crossings = []
    for i in range(len(grid) - 1):
        if values[i] == 0.0:
            crossings.append(float(grid[i]))
        elif values[i] * values[i + 1] < 0.0:
            a, b = float(grid[i]), float(grid[i + 1])
            ga = values[i]
            while b - a > tol_db:
                m = 0.5 * (a + b)
                gm = gap(m)
                if ga * gm <= 0.0:
                    b = m
                else:
                    a, ga = m, gm
            crossings.append(0.5 * (a + b))
    if values[-1] == 0.0:
        crossings.append(float(grid[-1]))

    if not crossings:
        gap_min = float(np.min(np.abs(values)))
        logger.debug("no crossing in [%s, %s] dB; nearest approach |g| = %.3g", lo, hi, gap_min)

    edges = [lo] + crossings + [hi]
    intervals = []
    for a, b in zip(edges[:-1], edges[1:]):
        mode = SU if gap(0.5 * (a + b)) >= 0.0 else MU
        intervals.append(((a, b), mode))
    return SwitchReport(crossings_db=crossings, active_mode=intervals, method="closed_form")


def _vary(base_cfg: ScenarioConfig, axis2: str, value) -> ScenarioConfig:
    if axis2 == "doppler":
        return replace(base_cfg, doppler_ts=float(value))
    if axis2 == "bits":
        return replace(base_cfg, feedback_bits=int(value))
    if axis2 == "ntx":
        return replace(base_cfg, n_tx=int(value), n_users=int(value))
    raise ValueError(f"unknown region axis {axis2!r}; expected doppler, bits or ntx")


def operating_region(base_cfg: ScenarioConfig, axis2: str, axis2_grid,
                     snr_grid_db) -> RegionGrid:
    """Winning mode on a (parameter x SNR) grid.

    A cell is MU exactly when the ZF sum-rate approximation exceeds the BF
    approximation there; the mode boundary is the contour of that matrix.
    """
    snr_grid_db = [float(p) for p in snr_grid_db]
    axis2_grid = list(axis2_grid)
    if not snr_grid_db or not axis2_grid:
        raise ValueError("grids must be non-empty")
    cells = []
    for value in axis2_grid:
        gap = rate_gap_fn(_vary(base_cfg, axis2, value))
        cells.append([MU if gap(p) < 0.0 else SU for p in snr_grid_db])
    return RegionGrid(
        axis1_name="snr_db", axis1_grid=snr_grid_db,
        axis2_name=axis2, axis2_grid=axis2_grid, cell_mode=cells,
    )


def min_activating_value(region: RegionGrid):
    """Smallest axis2 value whose row contains any MU cell, or None."""
    for value, row in zip(region.axis2_grid, region.cell_mode):
        if MU in row:
            return value
    return None


# ---------------------------------------------------------------------------
# calculated vs simulated switching points
# ---------------------------------------------------------------------------

def _last_sign_change(grid, diff):
    """SNR where diff changes sign, by linear interpolation at the last
    bracketing pair (the high-SNR crossing)."""
    for i in range(len(grid) - 2, -1, -1):
        a, b = diff[i], diff[i + 1]
        if a == 0.0:
            return float(grid[i])
        if a * b < 0.0:
            return float(grid[i] + (grid[i + 1] - grid[i]) * (-a) / (b - a))
    return None


def mc_switching_point(cfg: ScenarioConfig, csit: str, kind: str, mc: MonteCarloSpec,
                       window_db, step_db: float = 1.0, n_threads: int | None = None,
                       snr_cap_db: float = 80.0):
    """Upper mode-switching point from simulated curves on a coarse grid.

    Simulates BF and the chosen MU precoder on a ``step_db`` grid inside
    ``window_db`` and interpolates the root of the rate difference; the
    window slides right (up to ``snr_cap_db``) if the crossing is above it.
    """
    simulate_mu = simulate_zf if kind == "zf" else simulate_mmse
    lo, hi = float(window_db[0]), float(window_db[1])
    cache: dict[float, float] = {}

    def diff_at(p_db: float) -> float:
        if p_db not in cache:
            c = cfg.at_snr_db(p_db)
            bf = simulate_bf(c, csit, mc, n_threads=n_threads)
            mu = simulate_mu(c, csit, mc, n_threads=n_threads)
            cache[p_db] = bf.mean_bps_hz - mu.mean_bps_hz
        return cache[p_db]

    while True:
        grid = np.round(np.arange(lo, hi + step_db / 2, step_db), 9)
        diff = [diff_at(p) for p in grid]
        root = _last_sign_change(grid, diff)
        if root is not None:
            return root
        if diff[-1] < 0.0 and hi < snr_cap_db:  # MU still winning: look higher
            lo, hi = hi, min(hi + 6.0, snr_cap_db)
        elif diff[0] > 0.0 and lo > -10.0:  # BF already winning: look lower
            lo, hi = max(lo - 6.0, -10.0), lo
        else:
            return None


def table2_report(fdts_list, snr_range_db, mc: MonteCarloSpec | None = None,
                  n_threads: int | None = None):
    """Delay-only Nt = U = 4 switching points per normalized Doppler.

    Returns rows ``(fdts, calc_db, zf_mc_db, mmse_mc_db)``; the Monte-Carlo
    columns are None unless an ``mc`` spec is given. The calculated point is
    the upper crossing of the closed-form curves; the simulated ones come
    from a 1 dB grid near it with linear interpolation.
    """
    rows = []
    for fdts in fdts_list:
        cfg = ScenarioConfig(n_tx=4, n_users=4, snr_db=0.0, doppler_ts=float(fdts))
        report = find_switching_points(cfg, snr_range_db)
        calc = report.crossings_db[-1] if report.crossings_db else None
        zf_mc = mmse_mc = None
        if mc is not None and calc is not None:
            window = (calc - 2.0, min(calc + 8.0, snr_range_db[1] + 10.0))
            zf_mc = mc_switching_point(cfg, "delayed", "zf", mc, window, n_threads=n_threads)
            mmse_mc = mc_switching_point(cfg, "delayed", "mmse", mc, window, n_threads=n_threads)
        rows.append((float(fdts), calc, zf_mc, mmse_mc))
    return rows
