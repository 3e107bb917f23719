"""Command-line harness for the Monte Carlo experiments.

Configuration precedence: experiment defaults, then ``key = value`` lines
from ``--config``, then explicit flags.  Exit codes: 0 success, 1
configuration error, 2 more than 1% of trials failed numerically.
"""
from __future__ import annotations

import argparse
import sys

import numpy as np

from .experiments import (
    EXPERIMENTS,
    ConfigError,
    default_config,
    run_experiment,
)

__all__ = ["cli_main", "main"]

_GRID_KEYS = {"n_f", "snr_db", "n_b", "eta_max_db"}
_INT_KEYS = {"v", "trials", "seed"}
_CONFIG_KEYS = _GRID_KEYS | _INT_KEYS | {"experiment", "dict_tir", "dict_cse", "out"}


class _Parser(argparse.ArgumentParser):
    # usage text plus exit code 1 on any flag error, instead of argparse's 2
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(1)


def _build_parser() -> _Parser:
    p = _Parser(
        prog="sparse-shortener",
        description="Run channel-shortening design experiments and write CSV tables.",
    )
    p.add_argument("--experiment", choices=EXPERIMENTS, help="experiment to run")
    p.add_argument("--config", help="flat key = value config file")
    p.add_argument("--seed", type=int, help="base seed (trial t uses seed XOR t)")
    p.add_argument("--trials", type=int, help="number of channel realizations")
    p.add_argument("--out", help="output CSV path")
    p.add_argument("--v", type=int, help="channel memory")
    p.add_argument("--nf", help="equalizer span or comma-separated grid")
    p.add_argument("--snr-db", help="input SNR in dB or comma-separated grid")
    p.add_argument("--nb", help="target-response span or comma-separated grid")
    p.add_argument("--eta-max-db", help="loss budget in dB or comma-separated grid")
    p.add_argument("--dict-tir", help="target-response dictionary kind")
    p.add_argument("--dict-cse", help="equalizer dictionary kind")
    p.add_argument("--list-experiments", action="store_true",
                   help="print experiment names and exit")
    p.add_argument("--validate", action="store_true",
                   help="run the small-instance invariant suite and exit")
    return p


def _parse_grid(text: str, cast):
    try:
        return tuple(cast(part.strip()) for part in text.split(",") if part.strip())
    except ValueError as exc:
        raise ConfigError(f"bad grid value {text!r}") from exc


def _read_config_file(path: str) -> dict:
    values: dict = {}
    try:
        with open(path, "r", encoding="utf-8") as fh:
            content = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path!r}: {exc}") from exc
    for lineno, raw in enumerate(content.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
        key, _, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if key not in _CONFIG_KEYS:
            raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
        if key in _GRID_KEYS:
            cast = int if key in ("n_f", "n_b") else float
            values[key] = _parse_grid(value, cast)
        elif key in _INT_KEYS:
            try:
                values[key] = int(value)
            except ValueError as exc:
                raise ConfigError(f"{path}:{lineno}: {key} must be an integer") from exc
        else:
            values[key] = value
    return values


def _resolve_config(args) -> "ExperimentConfig":
    file_values = _read_config_file(args.config) if args.config else {}
    experiment = args.experiment or file_values.get("experiment")
    if not experiment:
        raise ConfigError("no experiment given (use --experiment or a config file)")
    overrides = dict(file_values)
    overrides.pop("experiment", None)
    if "out" in overrides:
        overrides["output_path"] = overrides.pop("out")
    cli_values = {
        "v": args.v,
        "trials": args.trials,
        "seed": args.seed,
        "dict_tir": args.dict_tir,
        "dict_cse": args.dict_cse,
        "output_path": args.out,
    }
    if args.nf is not None:
        cli_values["n_f"] = _parse_grid(args.nf, int)
    if args.snr_db is not None:
        cli_values["snr_db"] = _parse_grid(args.snr_db, float)
    if args.nb is not None:
        cli_values["n_b"] = _parse_grid(args.nb, int)
    if args.eta_max_db is not None:
        cli_values["eta_max_db"] = _parse_grid(args.eta_max_db, float)
    overrides.update({k: v for k, v in cli_values.items() if v is not None})
    return default_config(experiment, **overrides)


def _validate() -> int:
    """Quick invariant checks on small instances; 0 when everything holds."""
    from .coherence_lab import tridiag_ones_eigen, worst_case_coherence
    from .mmse_core import cse_mse, optimal_cse, optimal_tir, optimal_unit_tap
    from .signal_model import (
        NoiseSpec,
        build_channel_matrix,
        build_correlations,
        generate_updp_cir,
    )
    from .sparse_engine import (
        build_cse_problem,
        build_tir_problem,
        exhaustive_sparsest,
        omp_solve,
    )
    from .spectral_factors import (
        cholesky_factor,
        circulant_apply,
        circulant_apply_inverse,
        circulant_ryy_spectrum,
        eigen_factor,
    )

    failures = []

    def check(name, ok):
        print(("ok" if ok else "FAIL") + f": {name}")
        if not ok:
            failures.append(name)

    rng = np.random.default_rng(7)
    cir = generate_updp_cir(3, rng)
    noise = NoiseSpec.from_db(15.0)
    chan = build_channel_matrix(cir, 10)
    corr = build_correlations(chan, noise)

    h = chan.h_matrix
    woodbury = np.linalg.inv(
        np.eye(corr.n) + h.conj().T @ h / noise.sigma2
    )
    check(
        "error covariance matches its inverse-form identity",
        np.linalg.norm(corr.r_delta - woodbury) / np.linalg.norm(corr.r_delta) < 1e-8,
    )

    for fac in (cholesky_factor(corr.r_yy), eigen_factor(corr.r_yy)):
        err = np.linalg.norm(fac.reconstruct() - corr.r_yy) / np.linalg.norm(corr.r_yy)
        check(f"{fac.kind} factor reconstructs", err < 1e-10)

    spec = circulant_ryy_spectrum(cir, 10, noise)
    x = rng.standard_normal(10) + 1j * rng.standard_normal(10)
    roundtrip = circulant_apply(spec, circulant_apply_inverse(spec, x))
    check("circulant inverse round-trip", np.linalg.norm(roundtrip - x) < 1e-10)

    i_opt, mmse = optimal_unit_tap(corr)
    b = optimal_tir(corr, i_opt)
    w = optimal_cse(corr, b)
    rep = cse_mse(corr, w, b)
    check("optimal pair achieves the closed-form MMSE",
          abs(rep.xi_total - mmse) < 1e-9 * mmse)
    check("MSE decomposition consistent",
          abs(rep.xi_total - rep.xi_min - rep.xi_excess) < 1e-10 * rep.xi_total)

    prob = build_cse_problem("cholesky", corr, corr.r_yx @ b.coeffs, mmse * 0.1)
    sol = omp_solve(prob)
    oracle = exhaustive_sparsest(prob, max_k=prob.n_atoms)
    check("pursuit converged on a feasible problem", sol.converged)
    check("exhaustive oracle never needs more atoms",
          len(oracle.support) <= len(sol.support))

    eig = tridiag_ones_eigen(8)
    dense = np.diag(np.ones(8), 1) + np.diag(np.ones(8), -1)
    num = np.sort(np.linalg.eigvalsh(dense))[::-1]
    check("tridiagonal closed forms match a dense eigensolve",
          np.max(np.abs(num - eig.eigenvalues)) < 1e-10)

    tir_prob = build_tir_problem("cholesky", corr, i_opt, 0.0)
    check("coherence within [0, 1]",
          0.0 <= worst_case_coherence(tir_prob.phi).mu <= 1.0 + 1e-12)

    return 1 if failures else 0


def cli_main(argv) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    if args.list_experiments:
        for name in EXPERIMENTS:
            print(name)
        return 0
    if args.validate:
        return _validate()
    try:
        config = _resolve_config(args)
        summary = run_experiment(config)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    print(f"experiment:      {summary.experiment}")
    print(f"output:          {summary.output_path}")
    print(f"trials:          {summary.trials}")
    print(f"rows:            {summary.trial_rows}")
    print(f"errored trials:  {summary.errored_trials}")
    if summary.error_fraction > 0.01:
        print("numerical failure threshold exceeded", file=sys.stderr)
        return 2
    return 0


def main() -> None:
    sys.exit(cli_main(sys.argv[1:]))


if __name__ == "__main__":
    main()
