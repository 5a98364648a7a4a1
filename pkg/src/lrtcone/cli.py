"""Batch command-line front end.

Subcommands:

* ``experiment``    run a replication study and write report.json plus the
                    CDF CSV files (lrt_cdf.csv, reference_*.csv)
* ``reference``     sample a cone-projection reference distribution
* ``fisher-check``  write the eigenvalue spectrum of an information matrix
* ``bootstrap``     build a parametric bootstrap reference CDF

Settings come from an optional INI-style config file (sections
[experiment] and [optim]) overridden by command-line flags.  Unknown
sections or keys are rejected before any computation starts.  The worker
count defaults to the LRTCONE_WORKERS environment variable.

Exit codes: 0 success, 1 configuration error (the message names the
offending key), 2 experiment failure (too many replications failed).
"""

from __future__ import annotations

import argparse
import configparser
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import models
from .estimation import OptimConfig
from .fisher import (
    info_factor_submodel,
    info_re_saturated,
    info_saturated_gaussian,
    info_saturated_multinomial,
)
from .harness import (
    DEFAULT_N_OBS,
    ExperimentFailedError,
    ExperimentSpec,
    SCENARIOS,
    builtin_truths,
    cone_reference,
    run_bootstrap_reference,
    run_experiment,
    _fit_pair,
)
from .models import EfaParams, IfaParams
from .refdist import chi2_cdf
from .seeding import child_rng


class ConfigError(ValueError):
    """Bad or missing configuration; message names the offending key."""


_CONFIG_SCHEMA = {
    "experiment": {
        "scenario": str,
        "n_obs": int,
        "n_reps": int,
        "references": str,
        "n_draws": int,
        "bootstrap_b": int,
        "master_seed": int,
        "workers": int,
        "full_scale": bool,
        "out_dir": str,
    },
    "optim": {
        "n_starts": int,
        "max_iter": int,
        "grad_tol": float,
        "seed": int,
        "quad_nodes": int,
    },
}

FISHER_SCENARIOS = (
    "efa_1factor",
    "efa_2factor_null",
    "ifa_1factor",
    "ifa_2factor_null",
    "gaussian_saturated",
    "multinomial_saturated",
    "re_saturated",
)


def _parse_bool(raw: str, key: str) -> bool:
    lowered = raw.strip().lower()
    if lowered in ("1", "true", "yes", "on"):
        return True
    if lowered in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"key '{key}' must be a boolean, got {raw!r}")


def load_config(path: str | None) -> dict:
    """Parse and type-check the INI config; unknown keys are rejected."""
    settings: dict[str, dict] = {"experiment": {}, "optim": {}}
    if path is None:
        return settings
    parser = configparser.ConfigParser()
    read = parser.read(path)
    if not read:
        raise ConfigError(f"config file not found: {path}")
    for section in parser.sections():
        if section not in _CONFIG_SCHEMA:
            raise ConfigError(f"unknown config section '{section}'")
        for key, raw in parser.items(section):
            if key not in _CONFIG_SCHEMA[section]:
                raise ConfigError(f"unknown key '{key}' in section [{section}]")
            target = _CONFIG_SCHEMA[section][key]
            try:
                if target is bool:
                    settings[section][key] = _parse_bool(raw, key)
                else:
                    settings[section][key] = target(raw)
            except ConfigError:
                raise
            except ValueError as exc:
                raise ConfigError(f"key '{key}' in section [{section}]: {exc}") from exc
    return settings


def _default_workers() -> int:
    raw = os.environ.get("LRTCONE_WORKERS", "1")
    try:
        return max(int(raw), 1)
    except ValueError as exc:
        raise ConfigError(f"key 'LRTCONE_WORKERS' must be an integer, got {raw!r}") from exc


def _merge(config_value, flag_value, default):
    if flag_value is not None:
        return flag_value
    if config_value is not None:
        return config_value
    return default


def _write_analytic_cdf(path: Path, cdf, upper: float) -> None:
    grid = np.linspace(0.0, max(upper, 1.0), 512)
    values = np.asarray(cdf(grid), dtype=float)
    with open(path, "w") as handle:
        handle.write("value,cdf\n")
        for x, p in zip(grid, values):
            handle.write(f"{float(x)!r},{float(p)!r}\n")


def _cmd_experiment(args, config) -> int:
    exp_cfg = config["experiment"]
    scenario = _merge(exp_cfg.get("scenario"), args.scenario, None)
    if scenario is None:
        raise ConfigError("missing required key 'scenario'")
    if scenario not in SCENARIOS:
        raise ConfigError(f"key 'scenario' must be one of {SCENARIOS}, got '{scenario}'")
    references = _merge(exp_cfg.get("references"), args.refs, "wilks,cone")
    ref_tuple = tuple(r.strip() for r in references.split(",") if r.strip())
    optim = OptimConfig(
        n_starts=_merge(config["optim"].get("n_starts"), args.n_starts, 10),
        max_iter=_merge(config["optim"].get("max_iter"), None, 500),
        grad_tol=_merge(config["optim"].get("grad_tol"), None, 1e-6),
        seed=_merge(config["optim"].get("seed"), None, 0),
        quad_nodes=_merge(config["optim"].get("quad_nodes"), args.quad_nodes, 21),
    )
    spec = ExperimentSpec(
        scenario=scenario,
        n_obs=_merge(exp_cfg.get("n_obs"), args.n_obs, None),
        n_reps=_merge(exp_cfg.get("n_reps"), args.reps, None),
        optim=optim,
        references=ref_tuple,
        n_draws=_merge(exp_cfg.get("n_draws"), args.draws, 10_000),
        bootstrap_b=_merge(exp_cfg.get("bootstrap_b"), args.bootstrap_b, 200),
        master_seed=_merge(exp_cfg.get("master_seed"), args.seed, 0),
        full_scale=bool(_merge(exp_cfg.get("full_scale"), args.full_scale or None, False)),
    )
    try:
        spec.resolved()
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    workers = _merge(exp_cfg.get("workers"), args.workers, _default_workers())
    out_dir = Path(_merge(exp_cfg.get("out_dir"), args.out, "."))
    out_dir.mkdir(parents=True, exist_ok=True)

    report = run_experiment(spec, n_workers=workers)

    from .refdist import EmpiricalCDF

    EmpiricalCDF.from_samples(report.lrt_values).to_csv(out_dir / "lrt_cdf.csv")
    upper = float(report.lrt_values.max()) * 1.1 if report.lrt_values.size else 1.0
    _write_analytic_cdf(
        out_dir / "reference_wilks.csv", lambda x: chi2_cdf(report.wilks_df, x), upper
    )
    if report.cone_cdf is not None:
        report.cone_cdf.to_csv(out_dir / "reference_cone.csv")
    if report.bootstrap_cdf is not None:
        report.bootstrap_cdf.to_csv(out_dir / "reference_bootstrap.csv")
    with open(out_dir / "report.json", "w") as handle:
        json.dump(report.to_dict(), handle, indent=2, sort_keys=True)
    print(
        f"{scenario}: reps={report.n_reps} failed={report.n_failed} "
        f"ks_wilks={report.ks_vs_wilks:.4f} reject_wilks={report.rejection_rate_at_05_wilks:.4f}"
        + (f" ks_cone={report.ks_vs_cone:.4f}" if report.ks_vs_cone is not None else "")
    )
    print(f"wrote {out_dir / 'report.json'}")
    return 0


def _cmd_reference(args, config) -> int:
    scenario = args.scenario or config["experiment"].get("scenario")
    if scenario is None:
        raise ConfigError("missing required key 'scenario'")
    if scenario not in SCENARIOS:
        raise ConfigError(f"key 'scenario' must be one of {SCENARIOS}, got '{scenario}'")
    workers = _merge(config["experiment"].get("workers"), args.workers, _default_workers())
    out_dir = Path(args.out or ".")
    out_dir.mkdir(parents=True, exist_ok=True)
    cdf = cone_reference(
        scenario,
        builtin_truths()[scenario],
        n_draws=args.draws if args.draws is not None else 10_000,
        seed=args.seed if args.seed is not None else 0,
        n_workers=workers,
    )
    path = out_dir / "reference_cone.csv"
    cdf.to_csv(path)
    quantiles = ", ".join(f"q{int(100 * p)}={cdf.quantile(p):.4f}" for p in (0.5, 0.9, 0.95))
    print(f"{scenario}: {cdf.n} draws; {quantiles}")
    print(f"wrote {path}")
    return 0


def _fisher_info_for(scenario: str):
    truths = builtin_truths()
    efa = truths["efa_1a"]
    ifa = truths["ifa_2a"]
    re = truths["re_3"]
    if scenario == "efa_1factor":
        return info_factor_submodel(efa)
    if scenario == "efa_2factor_null":
        two_factor = EfaParams(
            loadings_1=efa.loadings_1,
            uniquenesses=efa.uniquenesses,
            loadings_2=np.zeros(efa.n_items),
        )
        return info_factor_submodel(two_factor)
    if scenario == "ifa_1factor":
        return info_factor_submodel(ifa)
    if scenario == "ifa_2factor_null":
        two_factor = IfaParams(
            easiness=ifa.easiness,
            discrimination_1=ifa.discrimination_1,
            discrimination_2=np.zeros(ifa.n_items),
        )
        return info_factor_submodel(two_factor)
    if scenario == "gaussian_saturated":
        return info_saturated_gaussian(models.efa_covariance(efa))
    if scenario == "multinomial_saturated":
        probs = np.exp(models.ifa_pattern_log_probs(ifa))
        return info_saturated_multinomial(probs[1:])
    if scenario == "re_saturated":
        return info_re_saturated(re.var_within * np.eye(re.group_size))
    raise ConfigError(f"key 'scenario' must be one of {FISHER_SCENARIOS}, got '{scenario}'")


def _cmd_fisher_check(args, config) -> int:
    if args.scenario is None:
        raise ConfigError("missing required key 'scenario'")
    info = _fisher_info_for(args.scenario)
    out_dir = Path(args.out or ".")
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / "eigen_spectrum.csv"
    with open(path, "w") as handle:
        handle.write("index,eigenvalue\n")
        for index, value in enumerate(info.eigenvalues):
            handle.write(f"{index},{float(value)!r}\n")
    ratio = info.eigen_ratio()
    print(
        f"{args.scenario}: dim={info.dim} rank_estimate={info.rank_estimate} "
        f"min_eig={info.eigenvalues[0]:.6e} max_eig={info.eigenvalues[-1]:.6e} ratio={ratio:.3e}"
    )
    print(f"wrote {path}")
    return 0


def _cmd_bootstrap(args, config) -> int:
    scenario = args.scenario or config["experiment"].get("scenario")
    if scenario is None:
        raise ConfigError("missing required key 'scenario'")
    if scenario not in SCENARIOS:
        raise ConfigError(f"key 'scenario' must be one of {SCENARIOS}, got '{scenario}'")
    workers = _merge(config["experiment"].get("workers"), args.workers, _default_workers())
    seed = args.seed if args.seed is not None else 0
    truth = builtin_truths()[scenario]
    n_obs = args.n_obs if args.n_obs is not None else DEFAULT_N_OBS[scenario]
    optim = OptimConfig(seed=seed)
    data = models.simulate(truth, n_obs, child_rng(seed, "experiment", 0))
    fit_null, _ = _fit_pair(scenario, data, optim, child_rng(seed, "experiment", 0))
    cdf = run_bootstrap_reference(
        scenario,
        fit_null.params,
        n_obs,
        args.bootstrap_b if args.bootstrap_b is not None else 200,
        seed,
        optim=optim,
        n_workers=workers,
        group_size=getattr(truth, "group_size", None),
    )
    out_dir = Path(args.out or ".")
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / "reference_bootstrap.csv"
    cdf.to_csv(path)
    print(f"{scenario}: {cdf.n} bootstrap statistics; median={cdf.quantile(0.5):.4f}")
    print(f"wrote {path}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="lrtcone",
        description=(
            "Likelihood ratio test experiments for latent variable models, with "
            "chi-square, cone-projection, and bootstrap reference distributions. "
            f"Scenarios: {', '.join(SCENARIOS)}."
        ),
    )
    sub = parser.add_subparsers(dest="command")

    def common(p, include_optim=False):
        p.add_argument("--config", help="INI config file ([experiment] and [optim] sections)")
        p.add_argument("--scenario", help=f"one of {', '.join(SCENARIOS)}")
        p.add_argument("--seed", type=int, help="master seed (default 0)")
        p.add_argument("--workers", type=int, help="worker processes (default $LRTCONE_WORKERS or 1)")
        p.add_argument("--out", help="output directory (default .)")

    p_exp = sub.add_parser("experiment", help="run a replication study")
    common(p_exp)
    p_exp.add_argument("--reps", type=int, help="number of replications (default per scenario)")
    p_exp.add_argument("--n-obs", dest="n_obs", type=int, help="sample size per replication")
    p_exp.add_argument("--draws", type=int, help="cone reference draws (default 10000)")
    p_exp.add_argument("--refs", help="comma list from wilks,cone,bootstrap (default wilks,cone)")
    p_exp.add_argument("--bootstrap-b", dest="bootstrap_b", type=int, help="bootstrap replicates")
    p_exp.add_argument("--n-starts", dest="n_starts", type=int, help="optimizer starts (default 10)")
    p_exp.add_argument("--quad-nodes", dest="quad_nodes", type=int, help="fit quadrature nodes (default 21)")
    p_exp.add_argument(
        "--full-scale",
        action="store_true",
        help="use the full simulation sizes (N=5000, R=5000) instead of desk scale",
    )

    p_ref = sub.add_parser("reference", help="sample a cone-projection reference CDF")
    common(p_ref)
    p_ref.add_argument("--draws", type=int, help="number of draws (default 10000)")

    p_fish = sub.add_parser("fisher-check", help="eigenvalue spectrum of an information matrix")
    p_fish.add_argument("--scenario", help=f"one of {', '.join(FISHER_SCENARIOS)}")
    p_fish.add_argument("--out", help="output directory (default .)")
    p_fish.add_argument("--config", help="unused; accepted for symmetry")

    p_boot = sub.add_parser("bootstrap", help="parametric bootstrap reference CDF")
    common(p_boot)
    p_boot.add_argument("--n-obs", dest="n_obs", type=int, help="sample size per bootstrap dataset")
    p_boot.add_argument("--bootstrap-b", dest="bootstrap_b", type=int, help="bootstrap replicates (default 200)")

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code in (0, None) else 1
    if args.command is None:
        parser.print_help()
        return 1
    try:
        config = load_config(getattr(args, "config", None))
        if args.command == "experiment":
            return _cmd_experiment(args, config)
        if args.command == "reference":
            return _cmd_reference(args, config)
        if args.command == "fisher-check":
            return _cmd_fisher_check(args, config)
        if args.command == "bootstrap":
            return _cmd_bootstrap(args, config)
        raise ConfigError(f"unknown command '{args.command}'")
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except ExperimentFailedError as exc:
        print(f"experiment failed: {exc}", file=sys.stderr)
        return 2


def console_main() -> None:
    sys.exit(main())


if __name__ == "__main__":
    console_main()
