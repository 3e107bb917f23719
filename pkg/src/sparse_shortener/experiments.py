"""Seeded Monte Carlo experiments over random uniform-profile channels.

Each experiment sweeps a parameter grid, draws one channel per trial (the
same channel is reused across the grid so curves share their channel set)
and writes per-trial rows plus mean/std aggregate rows to CSV.  Trial ``t``
derives its child seed as ``seed XOR t``, so runs are reproducible and
independent of worker scheduling.
"""
from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from typing import Iterable

import numpy as np

from .coherence_lab import worst_case_coherence
from .mmse_core import (
    Cse,
    Tir,
    cse_mse,
    loss_budget,
    optimal_cse,
    optimal_tir,
    optimal_unit_tap,
    tir_mse,
)
from .signal_model import (
    Cir,
    NoiseSpec,
    build_channel_matrix,
    build_correlations,
    generate_updp_cir,
)
from .sparse_engine import (
    CSE_DICTIONARY_KINDS,
    TIR_DICTIONARY_KINDS,
    assemble_sparse_cse,
    assemble_sparse_tir,
    build_circulant_cse_problem,
    build_cse_problem,
    build_tir_problem,
    omp_solve,
    significant_taps_baseline,
    _factor_transpose,
)
from .spectral_factors import (
    circulant_apply_inverse,
    circulant_dense,
    circulant_factor,
    circulant_rdelta_spectrum,
    circulant_ryy_spectrum,
)

__all__ = [
    "ConfigError",
    "ExperimentConfig",
    "ExperimentSummary",
    "EXPERIMENTS",
    "default_config",
    "run_experiment",
]

EXPERIMENTS = (
    "fig2_circulant_gap",
    "fig3_tir_coherence",
    "fig4_ssnr_vs_nf",
    "fig4b_ryy_coherence",
    "fig5_taps_vs_loss",
    "fig6_dict_compare",
)

# Dictionary pairs compared by fig6: target-response kind, equalizer kind.
FIG6_PAIRS = (("circulant", "circulant"), ("cholesky", "cholesky"), ("eigen", "gram"))

THREADS_ENV = "SPARSE_SHORTENER_THREADS"


class ConfigError(ValueError):
    """Invalid experiment configuration (maps to CLI exit code 1)."""


def _as_grid(value, cast) -> tuple:
    if isinstance(value, (list, tuple, np.ndarray)):
        items = tuple(cast(x) for x in value)
    else:
        items = (cast(value),)
    if not items:
        raise ConfigError("grids must be non-empty")
    return items


@dataclass(frozen=True)
class ExperimentConfig:
    """Fully resolved experiment parameters; grid fields are tuples."""

    experiment: str
    v: int
    n_f: tuple[int, ...]
    snr_db: tuple[float, ...]
    n_b: tuple[int, ...]
    eta_max_db: tuple[float, ...]
    trials: int
    seed: int
    dict_tir: str = "cholesky"
    dict_cse: str = "cholesky"
    output_path: str = ""

    def __post_init__(self):
        object.__setattr__(self, "n_f", _as_grid(self.n_f, int))
        object.__setattr__(self, "snr_db", _as_grid(self.snr_db, float))
        object.__setattr__(self, "n_b", _as_grid(self.n_b, int))
        object.__setattr__(self, "eta_max_db", _as_grid(self.eta_max_db, float))
        if self.experiment not in EXPERIMENTS:
            raise ConfigError(f"unknown experiment {self.experiment!r}")
        if self.trials < 1:
            raise ConfigError(f"trials must be >= 1, got {self.trials}")
        if self.v < 0:
            raise ConfigError(f"v must be >= 0, got {self.v}")
        if not (0 <= self.seed < 2**64):
            raise ConfigError("seed must fit in 64 bits")
        if self.dict_tir not in TIR_DICTIONARY_KINDS:
            raise ConfigError(f"invalid dict_tir {self.dict_tir!r}")
        if self.dict_cse not in CSE_DICTIONARY_KINDS:
            raise ConfigError(f"invalid dict_cse {self.dict_cse!r}")
        for n_f in self.n_f:
            if n_f < self.v + 1:
                raise ConfigError(
                    f"n_f={n_f} below v+1={self.v + 1}; the channel must fit"
                )
        for nb in self.n_b:
            if nb < 0:
                raise ConfigError(f"n_b must be >= 0, got {nb}")
        for eta in self.eta_max_db:
            if eta < 0:
                raise ConfigError(f"eta_max_db must be >= 0, got {eta}")


_DEFAULTS = {
    "fig2_circulant_gap": dict(
        v=5, n_f=(10, 15, 20, 25, 30, 40), snr_db=(20.0,), n_b=(2,),
        eta_max_db=(0.25,), trials=500,
    ),
    "fig3_tir_coherence": dict(
        v=8, n_f=(80,), snr_db=(-30.0, -20.0, -10.0, 0.0, 10.0, 20.0, 30.0, 40.0),
        n_b=(3,), eta_max_db=(0.25,), trials=200,
    ),
    "fig4_ssnr_vs_nf": dict(
        v=5, n_f=(10, 15, 20, 25, 30, 40), snr_db=(20.0,), n_b=(1, 2, 3, 4, 5),
        eta_max_db=(0.25,), trials=500,
    ),
    "fig4b_ryy_coherence": dict(
        v=8, n_f=(80,), snr_db=(-30.0, -20.0, -10.0, 0.0, 10.0, 20.0, 30.0, 40.0),
        n_b=(3,), eta_max_db=(0.25,), trials=200,
    ),
    "fig5_taps_vs_loss": dict(
        v=5, n_f=(40,), snr_db=(20.0,), n_b=(1, 2, 3, 4, 5),
        eta_max_db=(0.05, 0.1, 0.25, 0.5, 1.0), trials=500,
    ),
    "fig6_dict_compare": dict(
        v=8, n_f=(80,), snr_db=(20.0, 30.0), n_b=(3,),
        eta_max_db=(0.05, 0.1, 0.25, 0.5, 1.0), trials=500,
    ),
}


def default_config(experiment: str, **overrides) -> ExperimentConfig:
    """Desk-scale defaults for an experiment, with keyword overrides."""
    if experiment not in EXPERIMENTS:
        raise ConfigError(f"unknown experiment {experiment!r}")
    params = dict(_DEFAULTS[experiment])
    params.update(experiment=experiment, seed=0, output_path=f"{experiment}.csv")
    params.update({k: v for k, v in overrides.items() if v is not None})
    return ExperimentConfig(**params)


# --- per-experiment schemas -------------------------------------------------

_ID_COLS = ("trial", "channel_seed")

_SCHEMAS = {
    "fig2_circulant_gap": dict(
        params=("v", "n_f", "snr_db"),
        metrics=("i_opt", "mmse", "ssnr_exact", "ssnr_circulant", "gap_db"),
    ),
    "fig3_tir_coherence": dict(
        params=("v", "n_f", "snr_db"),
        metrics=("i_opt", "mu_tir_cholesky", "mu_tir_eigen"),
    ),
    "fig4_ssnr_vs_nf": dict(
        params=("v", "n_f", "snr_db", "n_b", "dict_tir"),
        metrics=("i_opt", "mmse", "tir_support_size", "ssnr_omp_tir",
                 "ssnr_significant_taps"),
    ),
    "fig4b_ryy_coherence": dict(
        params=("v", "n_f", "snr_db"),
        metrics=("mu_cse_cholesky", "mu_cse_eigen", "mu_cse_gram",
                 "mu_cse_circulant", "mu_cse_circulant_gram"),
    ),
    "fig5_taps_vs_loss": dict(
        params=("v", "n_f", "snr_db", "n_b", "eta_max_db", "dict_tir", "dict_cse"),
        metrics=("i_opt", "mmse", "ssnr_exact", "tir_support_size",
                 "cse_support_size", "active_tap_pct", "realized_loss_db",
                 "converged"),
    ),
    "fig6_dict_compare": dict(
        params=("v", "n_f", "snr_db", "n_b", "eta_max_db", "dict_tir", "dict_cse"),
        metrics=("i_opt", "tir_support_size", "cse_support_size",
                 "active_tap_pct", "realized_loss_db", "converged"),
    ),
}


def experiment_columns(experiment: str) -> tuple[str, ...]:
    s = _SCHEMAS[experiment]
    return _ID_COLS + s["params"] + s["metrics"] + ("error",)


# --- trial bodies -----------------------------------------------------------


def _ssnr(xi: float) -> float:
    return -10.0 * np.log10(xi)


def _fig2_rows(config: ExperimentConfig, trial: int, cir: Cir, seed: int) -> list[dict]:
    rows = []
    for snr_db in config.snr_db:
        noise = NoiseSpec.from_db(snr_db)
        for n_f in config.n_f:
            base = dict(trial=trial, channel_seed=seed, v=config.v, n_f=n_f,
                        snr_db=snr_db, error="")
            try:
                corr = build_correlations(build_channel_matrix(cir, n_f), noise)
                i = corr.n // 2  # fixed mid-span tap isolates the circulant effect
                b_ex = optimal_tir(corr, i)
                w_ex = optimal_cse(corr, b_ex)
                rep = cse_mse(corr, w_ex, b_ex)
                ssnr_exact = _ssnr(rep.xi_total)

                spec_d = circulant_rdelta_spectrum(cir, n_f, noise)
                e_i = np.zeros(corr.n, dtype=np.complex128)
                e_i[i] = 1.0
                col = circulant_apply_inverse(spec_d, e_i)
                coeffs = col / col[i]
                coeffs[i] = 1.0
                b_circ = Tir.from_coeffs(coeffs, unit_index=i)
                spec_y = circulant_ryy_spectrum(cir, n_f, noise)
                t_vec = corr.r_yx @ b_circ.coeffs
                w_circ = circulant_apply_inverse(spec_y, t_vec)
                rep_c = cse_mse(corr, Cse.from_coeffs(w_circ), b_circ)
                ssnr_circ = _ssnr(rep_c.xi_total)
                base.update(
                    i_opt=i, mmse=rep.xi_min, ssnr_exact=ssnr_exact,
                    ssnr_circulant=ssnr_circ, gap_db=abs(ssnr_exact - ssnr_circ),
                )
            except Exception as exc:
                base["error"] = f"{type(exc).__name__}: {exc}"
            rows.append(base)
    return rows


def _fig3_rows(config: ExperimentConfig, trial: int, cir: Cir, seed: int) -> list[dict]:
    rows = []
    n_f = config.n_f[0]
    for snr_db in config.snr_db:
        base = dict(trial=trial, channel_seed=seed, v=config.v, n_f=n_f,
                    snr_db=snr_db, error="")
        try:
            noise = NoiseSpec.from_db(snr_db)
            corr = build_correlations(build_channel_matrix(cir, n_f), noise)
            i_opt, _ = optimal_unit_tap(corr)
            mus = {}
            for kind in ("cholesky", "eigen"):
                prob = build_tir_problem(kind, corr, i_opt, 0.0)
                mus[f"mu_tir_{kind}"] = worst_case_coherence(prob.phi).mu
            base.update(i_opt=i_opt, **mus)
        except Exception as exc:
            base["error"] = f"{type(exc).__name__}: {exc}"
        rows.append(base)
    return rows


def _fig4_rows(config: ExperimentConfig, trial: int, cir: Cir, seed: int) -> list[dict]:
    rows = []
    for snr_db in config.snr_db:
        noise = NoiseSpec.from_db(snr_db)
        for n_f in config.n_f:
            prob = None
            try:
                corr = build_correlations(build_channel_matrix(cir, n_f), noise)
                i_opt, mmse = optimal_unit_tap(corr)
                if config.dict_tir == "circulant":
                    tir_source = circulant_rdelta_spectrum(cir, n_f, noise)
                else:
                    tir_source = corr
                prob = build_tir_problem(config.dict_tir, tir_source, i_opt, 0.0)
                shared_err = ""
            except Exception as exc:
                shared_err = f"{type(exc).__name__}: {exc}"
            for n_b in config.n_b:
                base = dict(trial=trial, channel_seed=seed, v=config.v, n_f=n_f,
                            snr_db=snr_db, n_b=n_b, dict_tir=config.dict_tir,
                            error="")
                if shared_err:
                    base["error"] = shared_err
                    rows.append(base)
                    continue
                try:
                    sol = omp_solve(prob, mode="fixed_k", k=n_b)
                    b_omp = assemble_sparse_tir(sol, i_opt, corr.n)
                    b_sig = significant_taps_baseline(corr, i_opt, n_b)
                    base.update(
                        i_opt=i_opt,
                        mmse=mmse,
                        tir_support_size=len(b_omp.support),
                        ssnr_omp_tir=_ssnr(tir_mse(corr, b_omp)),
                        ssnr_significant_taps=_ssnr(tir_mse(corr, b_sig)),
                    )
                except Exception as exc:
                    base["error"] = f"{type(exc).__name__}: {exc}"
                rows.append(base)
    return rows


def _fig4b_rows(config: ExperimentConfig, trial: int, cir: Cir, seed: int) -> list[dict]:
    rows = []
    n_f = config.n_f[0]
    for snr_db in config.snr_db:
        base = dict(trial=trial, channel_seed=seed, v=config.v, n_f=n_f,
                    snr_db=snr_db, error="")
        try:
            noise = NoiseSpec.from_db(snr_db)
            corr = build_correlations(build_channel_matrix(cir, n_f), noise)
            spec_y = circulant_ryy_spectrum(cir, n_f, noise)
            dicts = {
                "mu_cse_cholesky": _factor_transpose("cholesky", corr, "r_yy"),
                "mu_cse_eigen": _factor_transpose("eigen", corr, "r_yy"),
                "mu_cse_gram": corr.r_yy,
                "mu_cse_circulant": circulant_factor(spec_y).b_matrix.conj().T,
                "mu_cse_circulant_gram": circulant_dense(spec_y),
            }
            base.update({k: worst_case_coherence(p).mu for k, p in dicts.items()})
        except Exception as exc:
            base["error"] = f"{type(exc).__name__}: {exc}"
        rows.append(base)
    return rows


def _sparse_design_rows(
    config: ExperimentConfig,
    trial: int,
    cir: Cir,
    seed: int,
    pairs: Iterable[tuple[str, str]],
    include_mmse_cols: bool,
) -> list[dict]:
    """Shared body of fig5 and fig6: sparse target, then budgeted sparse equalizer."""
    rows = []
    n_f = config.n_f[0]
    for snr_db in config.snr_db:
        noise = NoiseSpec.from_db(snr_db)
        try:
            corr = build_correlations(build_channel_matrix(cir, n_f), noise)
            i_opt, mmse = optimal_unit_tap(corr)
            shared_err = ""
        except Exception as exc:
            shared_err = f"{type(exc).__name__}: {exc}"
        for dict_tir, dict_cse in pairs:
            prob_tir = None
            pair_err = shared_err
            if not pair_err:
                try:
                    if dict_tir == "circulant":
                        tir_source = circulant_rdelta_spectrum(cir, n_f, noise)
                    else:
                        tir_source = corr
                    prob_tir = build_tir_problem(dict_tir, tir_source, i_opt, 0.0)
                except Exception as exc:
                    pair_err = f"{type(exc).__name__}: {exc}"
            for n_b in config.n_b:
                prob_cse = None
                design_err = pair_err
                if not design_err:
                    try:
                        sol_tir = omp_solve(prob_tir, mode="fixed_k", k=n_b)
                        b_s = assemble_sparse_tir(sol_tir, i_opt, corr.n)
                        xi_min = tir_mse(corr, b_s)
                        if dict_cse == "circulant":
                            # reduced-complexity path: everything cyclic
                            prob_cse = build_circulant_cse_problem(
                                cir, n_f, noise, b_s, 0.0
                            )
                        else:
                            t_vec = corr.r_yx @ b_s.coeffs
                            prob_cse = build_cse_problem(dict_cse, corr, t_vec, 0.0)
                    except Exception as exc:
                        design_err = f"{type(exc).__name__}: {exc}"
                for eta in config.eta_max_db:
                    base = dict(trial=trial, channel_seed=seed, v=config.v, n_f=n_f,
                                snr_db=snr_db, n_b=n_b, eta_max_db=eta,
                                dict_tir=dict_tir, dict_cse=dict_cse, error="")
                    if design_err:
                        base["error"] = design_err
                        rows.append(base)
                        continue
                    try:
                        d_eq = loss_budget(eta, xi_min)
                        sol = omp_solve(replace(prob_cse, epsilon=d_eq))
                        w_s = assemble_sparse_cse(sol, n_f)
                        rep = cse_mse(corr, w_s, b_s)
                        base.update(
                            i_opt=i_opt,
                            tir_support_size=len(b_s.support),
                            cse_support_size=len(sol.support),
                            active_tap_pct=100.0 * len(sol.support) / n_f,
                            realized_loss_db=10.0 * np.log10(rep.xi_total / rep.xi_min),
                            converged=int(sol.converged),
                        )
                        if include_mmse_cols:
                            base.update(mmse=mmse, ssnr_exact=_ssnr(mmse))
                    except Exception as exc:
                        base["error"] = f"{type(exc).__name__}: {exc}"
                    rows.append(base)
    return rows


def _trial_rows(config: ExperimentConfig, trial: int) -> list[dict]:
    child_seed = config.seed ^ trial
    rng = np.random.default_rng(child_seed)
    cir = generate_updp_cir(config.v, rng)
    if config.experiment == "fig2_circulant_gap":
        return _fig2_rows(config, trial, cir, child_seed)
    if config.experiment == "fig3_tir_coherence":
        return _fig3_rows(config, trial, cir, child_seed)
    if config.experiment == "fig4_ssnr_vs_nf":
        return _fig4_rows(config, trial, cir, child_seed)
    if config.experiment == "fig4b_ryy_coherence":
        return _fig4b_rows(config, trial, cir, child_seed)
    if config.experiment == "fig5_taps_vs_loss":
        return _sparse_design_rows(
            config, trial, cir, child_seed,
            pairs=[(config.dict_tir, config.dict_cse)], include_mmse_cols=True,
        )
    if config.experiment == "fig6_dict_compare":
        return _sparse_design_rows(
            config, trial, cir, child_seed, pairs=FIG6_PAIRS, include_mmse_cols=False,
        )
    raise ConfigError(f"unknown experiment {config.experiment!r}")


# --- execution, aggregation, CSV --------------------------------------------


def _worker_count(trials: int) -> int:
    raw = os.environ.get(THREADS_ENV, "").strip()
    if raw:
        try:
            requested = int(raw)
        except ValueError as exc:
            raise ConfigError(f"{THREADS_ENV} must be an integer, got {raw!r}") from exc
        if requested < 0:
            raise ConfigError(f"{THREADS_ENV} must be >= 0")
    else:
        requested = 0
    if requested == 0:
        requested = os.cpu_count() or 1
    return max(1, min(requested, trials))


def _run_trials(config: ExperimentConfig) -> list[dict]:
    workers = _worker_count(config.trials)
    trials = range(config.trials)
    if workers == 1:
        results = [_trial_rows(config, t) for t in trials]
    else:
        chunk = max(1, config.trials // (workers * 4))
        try:
            with ProcessPoolExecutor(max_workers=workers) as pool:
                results = list(
                    pool.map(_trial_rows, [config] * config.trials, trials,
                             chunksize=chunk)
                )
        except (OSError, PermissionError):  # restricted environments
            results = [_trial_rows(config, t) for t in trials]
    rows = []
    for trial_rows in results:  # map preserves trial order
        rows.extend(trial_rows)
    return rows


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, str):
        return value
    if isinstance(value, (bool, np.bool_)):
        return "1" if value else "0"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return format(float(value), ".9g")


def _aggregate_rows(experiment: str, rows: list[dict]) -> list[dict]:
    schema = _SCHEMAS[experiment]
    params, metrics = schema["params"], schema["metrics"]
    groups: dict[tuple, list[dict]] = {}
    order: list[tuple] = []
    for row in rows:
        key = tuple(row[p] for p in params)
        if key not in groups:
            groups[key] = []
            order.append(key)
        if not row["error"]:
            groups[key].append(row)
    out = []
    for key in order:
        good = groups[key]
        for stat in ("mean", "std"):
            agg = dict(trial=stat, channel_seed="", error="")
            agg.update(zip(params, key))
            for metric in metrics:
                values = [row[metric] for row in good if metric in row]
                if not values:
                    agg[metric] = ""
                elif stat == "mean":
                    agg[metric] = float(np.mean(values))
                else:
                    agg[metric] = float(np.std(values))  # population std
            out.append(agg)
    return out


@dataclass(frozen=True)
class ExperimentSummary:
    experiment: str
    output_path: str
    trials: int
    trial_rows: int
    errored_rows: int
    errored_trials: int

    @property
    def error_fraction(self) -> float:
        """Fraction of trials with at least one failed grid point."""
        return self.errored_trials / self.trials if self.trials else 0.0


def run_experiment(config: ExperimentConfig) -> ExperimentSummary:
    """Execute all trials, write the CSV and return a run summary.

    The CSV holds one row per (trial, grid point) followed by mean and
    population-std rows per grid point.  Failed grid points are recorded in
    the ``error`` column and excluded from aggregates; identical
    config+seed reproduces the file byte for byte.
    """
    if not config.output_path:
        raise ConfigError("output_path must be set")
    rows = _run_trials(config)
    aggregates = _aggregate_rows(config.experiment, rows)
    columns = experiment_columns(config.experiment)
    lines = [",".join(columns)]
    for row in rows + aggregates:
        lines.append(",".join(_fmt(row.get(col, "")) for col in columns))
    with open(config.output_path, "w", encoding="utf-8", newline="") as fh:
        fh.write("\n".join(lines) + "\n")
    errored = sum(1 for row in rows if row["error"])
    errored_trials = len({row["trial"] for row in rows if row["error"]})
    return ExperimentSummary(
        experiment=config.experiment,
        output_path=config.output_path,
        trials=config.trials,
        trial_rows=len(rows),
        errored_rows=errored,
        errored_trials=errored_trials,
    )
