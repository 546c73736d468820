"""Scenario orchestration: dynamics curves, transfer law, detuning and beyond-RWA studies."""
from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import partial
from typing import Callable, Iterable, Sequence

import numpy as np

from .dynamics import (
    closed_form_four_partite,
    evolve,
    final_state_factorized,
    fidelity,
)
from .entanglement import (
    Sign,
    closed_form_C12,
    closed_form_Pgg,
    concurrence,
    electron_bell,
    electron_pair_layout,
    log_negativity,
    manifold_indices,
    qubit_log_negativity,
    sudden_death_time,
    transfer_law,
    WEIGHT_MIN,
)
from .errors import FitDegenerate, NoInteriorMax
from .hilbert import SidebandWindow
from .model import Generator, ProtocolParams, Shape

COLUMNS = ("t", "C12", "EN_AB", "Pgg", "w2_plus", "w2_minus", "EN_2plus", "EN_2minus", "edge_leakage", "norm_drift")


@dataclass
class ObservableSeries:
    """Column store of the tracked observables; NaN marks an undefined entry."""

    columns: dict = field(default_factory=lambda: {c: np.zeros(0) for c in COLUMNS})

    @classmethod
    def from_rows(cls, rows: Sequence[dict]) -> "ObservableSeries":
        return cls({c: np.array([r.get(c, np.nan) for r in rows], dtype=float) for c in COLUMNS})

    def __getitem__(self, name: str) -> np.ndarray:
        return self.columns[name]

    def __len__(self) -> int:
        return len(self.columns["t"])

    def rows(self):
        for i in range(len(self)):
            yield {c: self.columns[c][i] for c in COLUMNS}


@dataclass
class ScenarioResult:
    scenario_id: str
    params: ProtocolParams
    series: ObservableSeries
    summary: dict = field(default_factory=dict)
    # companion tables: file name -> (column names, rows)
    tables: dict = field(default_factory=dict)


def worker_count() -> int:
    env = os.environ.get("SIDEBAND_THREADS")
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


def map_jobs(fn: Callable, items: Iterable, workers: int | None = None) -> list:
    """Evaluate ``fn`` over ``items``; results ordered by input index."""
    items = list(items)
    workers = worker_count() if workers is None else workers
    if workers <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=min(workers, len(items))) as pool:
        return list(pool.map(fn, items))


# -- observables ---------------------------------------------------------------


def state_observables(flat: np.ndarray, window: SidebandWindow) -> dict:
    """All tracked observables of one joint pure state (flat [A, B, 1, 2] order)."""
    d = window.dim
    psi = np.asarray(flat).reshape(d, d, 2, 2)
    branches = psi.reshape(d * d, 4)
    rho12 = np.einsum("ai,aj->ij", branches, branches.conj())
    rho_ab = branches @ branches.conj().T
    row = {
        "C12": concurrence(rho12),
        "EN_AB": log_negativity(rho_ab, "B", electron_pair_layout(window)),
        "Pgg": float(np.sum(np.abs(psi[:, :, 0, 0]) ** 2)),
    }
    for sign, tag in ((Sign.PLUS, "plus"), (Sign.MINUS, "minus")):
        idx = list(manifold_indices(window, sign))
        block = rho_ab[np.ix_(idx, idx)]
        w2 = float(np.trace(block).real)
        row[f"w2_{tag}"] = w2
        row[f"EN_2{tag}"] = qubit_log_negativity(block / w2) if w2 >= WEIGHT_MIN else np.nan
    return row


def trajectory_series(traj, window: SidebandWindow) -> ObservableSeries:
    rows = []
    for k, t in enumerate(traj.times):
        row = state_observables(traj.states[k], window)
        row.update(t=t, edge_leakage=traj.edge_leakage[k], norm_drift=traj.norm_drift[k])
        rows.append(row)
    return ObservableSeries.from_rows(rows)


def analytic_series(p: ProtocolParams, times: np.ndarray) -> ObservableSeries:
    """Closed-form resonant exchange-only curves (no integration)."""
    rows = []
    layout = electron_pair_layout(p.window)
    d = p.window.dim
    for t in times:
        g = p.envelope_A.accumulated(t)
        pgg = closed_form_Pgg(g)
        branches = closed_form_four_partite(p, t).amplitudes.reshape(d * d, 4)
        rows.append(
            dict(
                t=t,
                C12=closed_form_C12(g),
                EN_AB=log_negativity(branches @ branches.conj().T, "B", layout),
                Pgg=pgg,
                w2_plus=pgg,
                w2_minus=pgg,
                EN_2plus=1.0 if pgg >= WEIGHT_MIN else np.nan,
                EN_2minus=1.0 if pgg >= WEIGHT_MIN else np.nan,
                edge_leakage=0.0,
                norm_drift=0.0,
            )
        )
    return ObservableSeries.from_rows(rows)


def first_zero_time(series: ObservableSeries, column: str = "C12", tol: float = 1e-12) -> float | None:
    hits = np.flatnonzero(series[column] <= tol)
    return float(series["t"][hits[0]]) if hits.size else None


def max_deviation(a: ObservableSeries, b: ObservableSeries, columns=("C12", "EN_AB", "Pgg", "w2_plus", "w2_minus")) -> float:
    return float(max(np.nanmax(np.abs(a[c] - b[c])) for c in columns))


# -- scenarios -----------------------------------------------------------------


def fig1_params(**kw) -> ProtocolParams:
    return ProtocolParams.symmetric(area=math.pi / 4, duration=10.0, **kw)


def run_fig1(p: ProtocolParams | None = None, samples: int = 400, include_full: bool = True) -> dict:
    """Resonant Bell-resource dynamics: exchange-only numerics, full numerics, closed form."""
    p = p or fig1_params()
    traj = evolve(p, Generator.RWA, samples)
    rwa = trajectory_series(traj, p.window)
    analytic = analytic_series(p, traj.times)

    death = first_zero_time(rwa)
    summary = dict(
        final_EN_AB=float(rwa["EN_AB"][-1]),
        final_w2_plus=float(rwa["w2_plus"][-1]),
        max_dev_rwa_analytic=max_deviation(rwa, analytic),
        max_edge_leakage=float(np.max(traj.edge_leakage)),
        max_norm_drift=float(np.max(traj.norm_drift)),
    )
    # only finite scalars go into a summary
    if death is not None:
        summary["sudden_death_time"] = death
    if p.envelope_A.shape is Shape.SQUARE and p.envelope_A == p.envelope_B:
        analytic_death = sudden_death_time(p.envelope_A.area, p.envelope_A.duration)
        if analytic_death is not None:
            summary["sudden_death_time_analytic"] = analytic_death
    out = {
        "rwa": ScenarioResult("fig1_rwa", p, rwa, summary),
        "analytic": ScenarioResult("fig1_analytic", p, analytic, {}),
    }
    if include_full:
        ftraj = evolve(p, Generator.FULL, samples)
        full = trajectory_series(ftraj, p.window)
        out["full"] = ScenarioResult(
            "fig1_full",
            p,
            full,
            dict(
                max_dev_full_rwa=max_deviation(full, rwa),
                final_EN_AB=float(full["EN_AB"][-1]),
                final_w2_plus=float(full["w2_plus"][-1]),
                max_edge_leakage=float(np.max(ftraj.edge_leakage)),
                max_norm_drift=float(np.max(ftraj.norm_drift)),
            ),
        )
    return out


def _or_nan(x):
    return np.nan if x is None else float(x)


def _final_observables(p: ProtocolParams, generator=Generator.RWA) -> dict:
    flat = final_state_factorized(p, generator)
    row = state_observables(flat, p.window)
    d = p.window.dim
    gg = flat.reshape(d, d, 2, 2)[:, :, 0, 0].reshape(-1)
    prob = float(np.vdot(gg, gg).real)
    row["herald_fidelity"] = fidelity(electron_bell(p.window, Sign.PLUS), gg / math.sqrt(prob)) if prob > 0 else np.nan
    row["norm_drift"] = abs(float(np.linalg.norm(flat)) - 1.0)
    return row


def _fig2_point(base: ProtocolParams, ap):
    alpha, phi = ap
    row = _final_observables(base.with_(alpha=alpha, phi=phi), Generator.RWA)
    return alpha, phi, row["EN_2minus"]


def run_fig2(
    alpha_grid: Sequence[float] | None = None,
    phi_grid: Sequence[float] | None = None,
    g: float = math.pi / 4,
    T: float = 10.0,
    p: ProtocolParams | None = None,
    workers: int | None = None,
) -> ScenarioResult:
    """Heralded log-negativity at the pulse end versus the resource amplitude alpha."""
    alpha_grid = np.linspace(0.0, 1.0, 21) if alpha_grid is None else np.asarray(alpha_grid, float)
    phi_grid = np.array([0.0, math.pi / 2, math.pi, 3 * math.pi / 2]) if phi_grid is None else np.asarray(phi_grid, float)
    p = p or ProtocolParams()
    env = p.envelope_A
    base = ProtocolParams.symmetric(
        shape=env.shape, area=g, duration=T, sigma_fraction=env.sigma_fraction,
        omega=p.omega, omega0=p.omega, window=p.window, step_fraction=p.step_fraction,
    )
    pts = [(float(a), float(ph)) for a in alpha_grid for ph in phi_grid]
    results = map_jobs(partial(_fig2_point, base), pts, workers)

    rows, devs = [], []
    for alpha, phi, en in results:
        en = 0.0 if math.isnan(en) else en
        c0 = 2 * alpha * math.sqrt(max(0.0, 1 - alpha * alpha))
        ana = transfer_law(alpha)
        devs.append(abs(en - ana))
        rows.append((alpha, phi, c0, en, ana))
    en_by_alpha = np.array([r[3] for r in rows]).reshape(len(alpha_grid), len(phi_grid))
    summary = dict(
        max_abs_deviation=float(max(devs)),
        max_phi_spread=float(np.max(en_by_alpha.max(axis=1) - en_by_alpha.min(axis=1))),
        points=len(rows),
    )
    return ScenarioResult(
        "fig2", base, ObservableSeries(), summary,
        {"transfer.csv": (("alpha", "phi", "C12_0", "EN_numeric", "EN_analytic"), rows)},
    )


def _detuning_point(base: ProtocolParams, generator, delta):
    q = base.with_(omega0=base.omega - delta)
    return delta, _final_observables(q, generator)


def run_detuning_sweep(
    delta_grid: Sequence[float] | None = None,
    p: ProtocolParams | None = None,
    generator=Generator.RWA,
    workers: int | None = None,
) -> ScenarioResult:
    """Final transfer versus detuning (same detuning on both arms, omega held fixed)."""
    p = p or fig1_params()
    g0 = p.envelope_A.peak
    delta_grid = np.arange(-12, 13) * g0 if delta_grid is None else np.asarray(delta_grid, float)
    results = map_jobs(partial(_detuning_point, p, Generator(generator)), list(delta_grid), workers)
    cols = ("delta", "w2_plus", "w2_minus", "herald_fidelity", "EN_AB", "EN_2plus", "EN_2minus")
    rows = [(float(dl),) + tuple(float(r[c]) for c in cols[1:]) for dl, r in results]

    w2 = {round(dl / g0, 9): r["w2_plus"] for dl, r in results}
    w2_0 = w2.get(0.0, np.nan)
    summary = dict(w2_plus_resonant=float(w2_0), G0=g0)
    for k in (4, 10):
        if k in w2 and -k in w2:
            summary[f"w2_plus_at_{k}G0"] = float(max(w2[k], w2[-k]))
    if "w2_plus_at_4G0" in summary:
        summary["suppressed_at_4G0"] = bool(summary["w2_plus_at_4G0"] < w2_0)
    if "w2_plus_at_10G0" in summary:
        summary["ratio_at_10G0"] = float(summary["w2_plus_at_10G0"] / w2_0)
    return ScenarioResult("detuning", p, ObservableSeries(), summary, {"detuning.csv": (cols, rows)})


def heralded_infidelity(p: ProtocolParams, generator=Generator.FULL) -> tuple:
    """1 - F of the gg-heralded electron state against the plus electron Bell state.

    Returns ``(infidelity, norm_drift)``.
    """
    flat = final_state_factorized(p, generator)
    d = p.window.dim
    gg = flat.reshape(d, d, 2, 2)[:, :, 0, 0].reshape(-1)
    prob = float(np.vdot(gg, gg).real)
    f = fidelity(electron_bell(p.window, Sign.PLUS), gg / math.sqrt(prob))
    return max(0.0, 1.0 - f), abs(float(np.linalg.norm(flat)) - 1.0)


def _leakage_point(base: ProtocolParams, generator, phase_average: int, T):
    period = 2 * math.pi / base.omega_plus
    vals, drifts = [], []
    for j in range(phase_average):
        Tj = T + j * period / phase_average
        env = base.envelope_A
        q = ProtocolParams.symmetric(
            shape=env.shape, area=env.area, duration=Tj, sigma_fraction=env.sigma_fraction,
            omega=base.omega, omega0=base.omega0, alpha=base.alpha, phi=base.phi,
            window=base.window, step_fraction=base.step_fraction,
        )
        L, drift = heralded_infidelity(q, generator)
        vals.append(L)
        drifts.append(drift)
    return T, float(np.mean(vals)), float(max(drifts))


def run_leakage_scaling(
    T_grid: Sequence[float] | None = None,
    g: float = math.pi / 4,
    generator=Generator.FULL,
    p: ProtocolParams | None = None,
    phase_average: int = 8,
    fit: bool = True,
    workers: int | None = None,
) -> ScenarioResult:
    """Heralded-branch infidelity at fixed area versus pulse duration, with a log-log fit.

    Each point is averaged over ``phase_average`` durations spread across one
    counter-rotating period ``2 pi / Omega+`` so the fit sees the envelope of
    the tail rather than its phase-dependent ripple.
    """
    T_grid = np.geomspace(10.0, 100.0, 9) if T_grid is None else np.asarray(T_grid, float)
    base = p or ProtocolParams()
    base = ProtocolParams.symmetric(
        area=g, duration=float(T_grid[0]), omega=base.omega, omega0=base.omega0,
        window=base.window, step_fraction=base.step_fraction, alpha=base.alpha, phi=base.phi,
    )
    results = map_jobs(partial(_leakage_point, base, Generator(generator), phase_average), list(T_grid), workers)
    rows = [(T, L, drift) for T, L, drift in results]
    summary = dict(max_leakage=float(max(r[1] for r in rows)))
    if fit:
        slope, intercept, resid, used = fit_power_law(rows)
        summary.update(slope=slope, intercept=intercept, residual=resid, points_used=used)
    return ScenarioResult("leakage", base, ObservableSeries(), summary, {"leakage.csv": (("T", "leakage", "norm_drift"), rows)})


def fit_power_law(rows) -> tuple:
    """Least-squares line through (log T, log L), skipping points not clearly above drift."""
    T = np.array([r[0] for r in rows])
    L = np.array([r[1] for r in rows])
    drift = np.array([r[2] for r in rows])
    if np.all(L < 1e-14):
        raise FitDegenerate("all leakage values are below 1e-14")
    ok = (L > 100 * drift) & (L > 1e-14)
    if ok.sum() < 2:
        raise FitDegenerate("fewer than two points exceed 100x the norm drift")
    x, y = np.log(T[ok]), np.log(L[ok])
    (slope, intercept), res, *_ = np.polyfit(x, y, 1, full=True)
    resid = float(np.sqrt(res[0] / ok.sum())) if res.size else 0.0
    return float(slope), float(intercept), resid, int(ok.sum())


def _w2_point(base: ProtocolParams, generator, delta):
    q = base.with_(omega0=base.omega - delta)
    flat = final_state_factorized(q, generator)
    d = q.window.dim
    psi = flat.reshape(d * d, 4)
    i, j = manifold_indices(q.window, Sign.PLUS)
    return float(np.sum(np.abs(psi[i]) ** 2) + np.sum(np.abs(psi[j]) ** 2))


def quadratic_peak(x: np.ndarray, y: np.ndarray) -> float:
    """Vertex of the parabola through the grid maximum and its two neighbours."""
    k = int(np.argmax(y))
    if k == 0 or k == len(y) - 1:
        raise NoInteriorMax(f"maximum at the scan boundary (index {k})")
    x0, x1, x2 = x[k - 1 : k + 2]
    y0, y1, y2 = y[k - 1 : k + 2]
    num = (x1 - x0) ** 2 * (y1 - y2) - (x1 - x2) ** 2 * (y1 - y0)
    den = (x1 - x0) * (y1 - y2) - (x1 - x2) * (y1 - y0)
    return float(x1 - 0.5 * num / den) if den != 0 else float(x1)


def effective_detuning_scan(
    p: ProtocolParams | None = None,
    delta_scan: Sequence[float] | None = None,
    generator=Generator.FULL,
    workers: int | None = None,
) -> tuple:
    """(optimal detuning, table rows) from a scan of the final plus-manifold weight."""
    p = p or fig1_params()
    g0 = p.envelope_A.peak
    delta_scan = np.linspace(-0.5, 0.5, 21) * g0 if delta_scan is None else np.asarray(delta_scan, float)
    w2 = np.array(map_jobs(partial(_w2_point, p, Generator(generator)), list(delta_scan), workers))
    return quadratic_peak(delta_scan, w2), list(zip(map(float, delta_scan), map(float, w2)))


def fit_effective_detuning(p=None, delta_scan=None, generator=Generator.FULL, workers=None) -> float:
    """Detuning that maximizes the final plus-manifold weight (empirical resonance shift)."""
    return effective_detuning_scan(p, delta_scan, generator, workers)[0]


def run_bloch_siegert(p: ProtocolParams | None = None, delta_scan=None, workers=None) -> ScenarioResult:
    p = p or fig1_params()
    shift, rows = effective_detuning_scan(p, delta_scan, Generator.FULL, workers)
    rwa_shift, _ = effective_detuning_scan(p, delta_scan, Generator.RWA, workers)
    g0 = p.envelope_A.peak
    spacing = rows[1][0] - rows[0][0] if len(rows) > 1 else np.nan
    summary = dict(delta_star=shift, delta_star_rwa=rwa_shift, G0=g0, scan_spacing=spacing,
                   shift_over_G0sq_per_Omega=shift / (g0 * g0 / p.omega_plus))
    return ScenarioResult("bloch_siegert", p, ObservableSeries(), summary, {"bloch_siegert.csv": (("delta", "w2_plus"), rows)})
