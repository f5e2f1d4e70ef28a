"""Command-line surface: simulate | fit | forecast | diagnose | demo-identifiability.

Every subcommand accepts --seed, --config, --out, --threads, and --quiet,
writes plot-ready CSV/JSON only, and drops a manifest.json with input/output
digests. Configuration precedence is CLI flags > config file > built-in
defaults. Exit codes: 0 ok, 1 runtime failure, 2 usage or config error.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys

import numpy as np

from . import __version__, dataio, diagnostics, forecasting, priors, sampler
from .manifest import RunManifest
from .model import LinkFunction
from .sampler import ConfigError, PosteriorDraws, SamplerConfig

USAGE_EXIT = 2
RUNTIME_EXIT = 1

_RUN_KEYS = {
    "preset": str,
    "chains": int,
    "iters": int,
    "burn_in": int,
    "thin": int,
    "swap_every": int,
    "ladder_base": float,
    "seed": int,
    "horizon": int,
    "threads": int,
    "zero_floor": float,
    "scenario": str,
}


class UsageError(ValueError):
    """Bad flags, config keys, or input files."""


def _write_csv(path, header: list[str], rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow([v if isinstance(v, str) else repr(float(v)) for v in row])


def _write_json(path, payload: dict) -> None:
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_run_config(path) -> dict:
    """Parse key = value run options (prior keys belong in --prior-file)."""
    out = {}
    with open(path) as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise UsageError(f"{path}:{lineno}: expected key = value")
            key, _, value = line.partition("=")
            key, value = key.strip(), value.strip()
            if key not in _RUN_KEYS:
                raise UsageError(
                    f"{path}:{lineno}: unknown key {key!r}; "
                    f"known keys: {', '.join(sorted(_RUN_KEYS))}"
                )
            out[key] = _RUN_KEYS[key](value)
    return out


def _resolve(args, key, default):
    """CLI flag > config file > default."""
    cli_val = getattr(args, key, None)
    if cli_val is not None:
        return cli_val
    if args._file_config and key in args._file_config:
        return args._file_config[key]
    return default


def _apply_threads(n: int | None) -> None:
    if not n:
        return
    try:
        import numba

        numba.set_num_threads(max(1, min(n, numba.config.NUMBA_NUM_THREADS)))
    except Exception:
        pass  # thread cap is best-effort; results never depend on it


def _prior_config(args) -> priors.PriorConfig:
    if getattr(args, "prior_file", None):
        if not os.path.exists(args.prior_file):
            raise UsageError(f"prior file not found: {args.prior_file}")
        return priors.load_prior_config(args.prior_file)
    preset = _resolve(args, "preset", "default")
    try:
        return priors.preset_by_name(preset)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _out_dir(args) -> str:
    out = args.out or "."
    os.makedirs(out, exist_ok=True)
    return out


# ---------------------------------------------------------------------------
# subcommands


def cmd_simulate(args) -> int:
    scenario = _resolve(args, "scenario", None)
    if scenario is None:
        raise UsageError("simulate requires --scenario (scn1 | scn2 | scn3)")
    try:
        spec = dataio.ScenarioSpec(id=scenario, seed=_resolve(args, "seed", 0))
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    out = _out_dir(args)
    seed = _resolve(args, "seed", 0)
    mf = RunManifest("simulate", {"scenario": scenario, "stochastic": args.stochastic,
                                  "gamma_transform": args.gamma_transform,
                                  "integerize": args.integerize}, seed)
    rng = np.random.default_rng(seed)
    if args.stochastic:
        obs, truth = dataio.stochastic_generate(spec, rng, args.gamma_transform)
    else:
        obs, truth = dataio.generate_scenario(
            spec, rng, args.gamma_transform, integerize=args.integerize
        )

    dataset_path = os.path.join(out, "dataset.json")
    dataio.save_dataset(obs, dataset_path)
    truth_path = os.path.join(out, "truth.csv")
    traj = truth.trajectory
    rows = [
        (
            str(t),
            obs.date(t).isoformat(),
            obs.B[t],
            truth.params.beta[t],
            truth.gamma[t],
            truth.gamma_tilde[t],
            traj.S[t],
            traj.I_U[t],
            traj.I_D[t],
            traj.R[t],
            truth.r0_path[t],
            truth.re_path[t],
        )
        for t in range(obs.T + 1)
    ]
    _write_csv(
        truth_path,
        ["t", "date", "B", "beta", "gamma", "gamma_tilde", "S", "I_U", "I_D", "R", "R0", "Re"],
        rows,
    )
    mf.add_output(dataset_path)
    mf.add_output(truth_path)
    mf.write(out)
    if not args.quiet:
        print(f"simulate: wrote {dataset_path} and {truth_path}")
    return 0


def cmd_fit(args) -> int:
    if not args.dataset or not os.path.exists(args.dataset):
        raise UsageError(f"dataset file not found: {args.dataset!r}")
    obs = dataio.load_dataset(args.dataset)
    prior_cfg = _prior_config(args)
    seed = _resolve(args, "seed", 0)
    scfg = SamplerConfig(
        n_chains=_resolve(args, "chains", 10),
        n_iter=_resolve(args, "iters", 50000),
        burn_in=_resolve(args, "burn_in", 20000),
        thin=_resolve(args, "thin", 30),
        swap_every=_resolve(args, "swap_every", 1),
        ladder_base=_resolve(args, "ladder_base", 1.5),
        rng_seed=seed,
    )
    out = _out_dir(args)
    mf = RunManifest(
        "fit",
        {
            "dataset": args.dataset,
            "preset": _resolve(args, "preset", "default"),
            "prior_file": getattr(args, "prior_file", None),
            "chains": scfg.n_chains,
            "iters": scfg.n_iter,
            "burn_in": scfg.burn_in,
            "thin": scfg.thin,
            "swap_every": scfg.swap_every,
            "ladder_base": scfg.ladder_base,
        },
        seed,
    )
    mf.add_input(args.dataset)

    draws = sampler.run_sampler(obs, prior_cfg, scfg, quiet=args.quiet)

    draws_path = os.path.join(out, "draws.csv")
    draws.to_csv(draws_path)
    summary = draws.summary()
    summary["link"] = prior_cfg.link.value
    summary["preset"] = _resolve(args, "preset", "default")
    summary["dataset_path"] = os.path.abspath(args.dataset)
    summary["seed"] = seed
    summary_path = os.path.join(out, "summary.json")
    _write_json(summary_path, summary)

    re = draws.re_paths
    band_path = os.path.join(out, "re_band.csv")
    med = np.nanmedian(re, axis=0)
    lo = np.nanquantile(re, 0.025, axis=0)
    hi = np.nanquantile(re, 0.975, axis=0)
    _write_csv(
        band_path,
        ["date", "median", "lo95", "hi95"],
        [
            (obs.date(t).isoformat(), med[t], lo[t], hi[t])
            for t in range(obs.T + 1)
        ],
    )
    for pth in (draws_path, summary_path, band_path):
        mf.add_output(pth)
    mf.write(out)
    if not args.quiet:
        print(f"fit: {len(draws)} draws -> {draws_path}")
    return 0


def _load_draws_and_meta(args) -> tuple[PosteriorDraws, dict]:
    if not args.draws or not os.path.exists(args.draws):
        raise UsageError(f"draws file not found: {args.draws!r}")
    try:
        draws = PosteriorDraws.from_csv(args.draws)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    meta = {}
    summary_path = args.summary or os.path.join(os.path.dirname(args.draws), "summary.json")
    if os.path.exists(summary_path):
        with open(summary_path) as fh:
            meta = json.load(fh)
    return draws, meta


def _resolve_dataset(args, meta) -> dataio.Observations:
    dataset = args.dataset or meta.get("dataset_path")
    if not dataset or not os.path.exists(dataset):
        raise UsageError(
            "dataset not found; pass --dataset (fit recorded "
            f"{meta.get('dataset_path')!r})"
        )
    args._dataset_used = dataset
    return dataio.load_dataset(dataset)


def _resolve_link(args, meta) -> LinkFunction:
    name = getattr(args, "link", None) or meta.get("link", "logit")
    return LinkFunction.from_name(name)


def cmd_forecast(args) -> int:
    horizon = _resolve(args, "horizon", 30)
    if horizon < 1:
        raise UsageError("horizon must be >= 1")
    draws, meta = _load_draws_and_meta(args)
    obs = _resolve_dataset(args, meta)
    link = _resolve_link(args, meta)
    prior_cfg = priors.PriorConfig(link=link)
    seed = _resolve(args, "seed", 0)
    out = _out_dir(args)
    mf = RunManifest(
        "forecast",
        {"draws": args.draws, "dataset": args._dataset_used, "horizon": horizon,
         "link": link.value},
        seed,
    )
    mf.add_input(args.draws)
    mf.add_input(args._dataset_used)

    fc = forecasting.forecast(draws, obs, prior_cfg, horizon, seed=seed)
    outputs = []
    for which, name in (("B", "forecast_cases.csv"), ("Re", "forecast_re.csv")):
        rows = forecasting.forecast_table(fc, obs, which)
        path = os.path.join(out, name)
        _write_csv(
            path,
            ["date", "median", "lo95", "hi95"],
            [(r["date"], r["median"], r["lo95"], r["hi95"]) for r in rows],
        )
        outputs.append(path)
    if args.keep_draws:
        for mat, name in ((fc.B_star, "forecast_cases_draws.csv"), (fc.Re_star, "forecast_re_draws.csv")):
            path = os.path.join(out, name)
            _write_csv(path, [f"h{h + 1}" for h in range(fc.horizon)], mat)
            outputs.append(path)
    for pth in outputs:
        mf.add_output(pth)
    mf.write(out)
    if not args.quiet:
        print(f"forecast: horizon {horizon}, {len(fc)} draws -> {outputs[0]}")
    return 0


def cmd_diagnose(args) -> int:
    draws, meta = _load_draws_and_meta(args)
    obs = _resolve_dataset(args, meta)
    link = _resolve_link(args, meta)
    out = _out_dir(args)
    mf = RunManifest(
        "diagnose",
        {"draws": args.draws, "dataset": args._dataset_used, "link": link.value},
        _resolve(args, "seed", 0),
    )
    mf.add_input(args.draws)
    mf.add_input(args._dataset_used)

    # convergence z-scores per scalar chain, I_U0 and eta first
    chains: dict[str, np.ndarray] = {
        "I_U0": draws.r0 * obs.I_D0,
    }
    for a in range(draws.eta.shape[1]):
        chains[f"eta_{a}"] = draws.eta[:, a]
    chains["r0"] = draws.r0
    chains["alpha_inv"] = draws.alpha_inv
    chains["sigma_beta2"] = draws.sigma_beta2
    chains["rho"] = draws.rho
    chains["sigma_gamma2"] = draws.sigma_gamma2
    for a in range(draws.mu.shape[1]):
        chains[f"mu_{a}"] = draws.mu[:, a]
    rows = []
    for name, chain in chains.items():
        try:
            res = diagnostics.geweke_z(chain)
            rows.append((name, res.z_score, res.segment_fractions[0], res.segment_fractions[1]))
        except (diagnostics.DegenerateChain, ValueError) as exc:
            raise UsageError(f"geweke on {name}: {exc}") from None
    geweke_path = os.path.join(out, "geweke.csv")
    _write_csv(geweke_path, ["param", "z_score", "frac_first", "frac_last"], rows)

    fit = diagnostics.bayesian_chi2(draws, obs, link)
    chi2_path = os.path.join(out, "chi2_fit.json")
    _write_json(
        chi2_path,
        {
            "exceed_proportion": fit.exceed_proportion,
            "threshold": fit.threshold,
            "omega_mean": float(np.mean(fit.omega_draws)),
            "n_draws_used": int(len(fit.omega_draws)),
            "n_skipped": fit.n_skipped,
            "bin_edges": fit.bin_edges.tolist(),
            "bin_probs": fit.bin_probs.tolist(),
        },
    )
    qq_path = os.path.join(out, "qq.csv")
    _write_csv(
        qq_path,
        ["empirical_quantile", "theoretical_quantile"],
        [(r["empirical_quantile"], r["theoretical_quantile"]) for r in diagnostics.qq_table(fit)],
    )
    for pth in (geweke_path, chi2_path, qq_path):
        mf.add_output(pth)
    mf.write(out)
    if not args.quiet:
        print(f"diagnose: wrote {geweke_path}, {chi2_path}, {qq_path}")
    return 0


def cmd_demo_identifiability(args) -> int:
    out = _out_dir(args)
    mf = RunManifest("demo-identifiability", {}, None)
    pair = dataio.demo_identifiability_pair()
    T = pair.params_1.T
    table_path = os.path.join(out, "identifiability.csv")
    _write_csv(
        table_path,
        ["t", "beta_1", "beta_2", "B", "Re_1", "Re_2"],
        [
            (str(t), pair.params_1.beta[t], pair.params_2.beta[t], pair.B_1[t],
             pair.re_1[t], pair.re_2[t])
            for t in range(T + 1)
        ],
    )
    mismatch = float(np.max(np.abs(pair.B_1 - pair.B_2) / np.maximum(1.0, pair.B_1)))
    summary_path = os.path.join(out, "identifiability_summary.json")
    _write_json(
        summary_path,
        {
            "alpha_1": pair.params_1.alpha,
            "alpha_2": pair.params_2.alpha,
            "gamma_1": pair.gamma_1,
            "gamma_2": pair.gamma_2,
            "max_relative_B_mismatch": mismatch,
            "max_re_gap": float(np.max(np.abs(pair.re_1 - pair.re_2))),
        },
    )
    mf.add_output(table_path)
    mf.add_output(summary_path)
    mf.write(out)
    if not args.quiet:
        print(f"demo-identifiability: gamma_2 = {pair.gamma_2:.6f} -> {table_path}")
    return 0


# ---------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None, help="RNG seed (default 0)")
    common.add_argument("--config", default=None, help="key = value run options file")
    common.add_argument("--out", default=None, help="output directory (default .)")
    common.add_argument("--threads", type=int, default=None, help="cap worker threads")
    common.add_argument("--quiet", action="store_true", help="suppress progress output")

    p = argparse.ArgumentParser(
        prog="epinfer",
        description="Bayesian epidemic transmission inference from daily confirmed cases",
    )
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    ps = sub.add_parser("simulate", parents=[common], help="generate a synthetic dataset")
    ps.add_argument("--scenario", choices=["scn1", "scn2", "scn3"], default=None)
    ps.add_argument("--stochastic", action="store_true", help="integer binomial-chain generator")
    ps.add_argument("--integerize", action="store_true", help="round simulated counts")
    ps.add_argument("--gamma-transform", choices=["cloglog", "logit"], default="cloglog",
                    dest="gamma_transform")
    ps.set_defaults(func=cmd_simulate)

    pf = sub.add_parser("fit", parents=[common], help="sample the posterior")
    pf.add_argument("--dataset", required=True)
    pf.add_argument("--preset", default=None, choices=list(priors.PRESET_NAMES))
    pf.add_argument("--prior-file", default=None, dest="prior_file")
    pf.add_argument("--chains", type=int, default=None)
    pf.add_argument("--iters", type=int, default=None)
    pf.add_argument("--burn-in", type=int, default=None, dest="burn_in")
    pf.add_argument("--thin", type=int, default=None)
    pf.add_argument("--swap-every", type=int, default=None, dest="swap_every")
    pf.add_argument("--ladder-base", type=float, default=None, dest="ladder_base")
    pf.set_defaults(func=cmd_fit)

    pc = sub.add_parser("forecast", parents=[common], help="posterior predictive forecast")
    pc.add_argument("--draws", required=True)
    pc.add_argument("--dataset", default=None)
    pc.add_argument("--summary", default=None, help="summary.json from the fit")
    pc.add_argument("--horizon", type=int, default=None)
    pc.add_argument("--keep-draws", action="store_true", dest="keep_draws")
    pc.set_defaults(func=cmd_forecast)

    pd = sub.add_parser("diagnose", parents=[common], help="convergence and fit checks")
    pd.add_argument("--draws", required=True)
    pd.add_argument("--dataset", default=None)
    pd.add_argument("--summary", default=None)
    pd.add_argument("--link", default=None, choices=["logit", "probit", "cloglog"])
    pd.set_defaults(func=cmd_diagnose)

    pi = sub.add_parser(
        "demo-identifiability", parents=[common],
        help="two processes, identical observations, different reproduction numbers",
    )
    pi.set_defaults(func=cmd_demo_identifiability)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        args._file_config = load_run_config(args.config) if args.config else {}
        _apply_threads(_resolve(args, "threads", None))
        return args.func(args)
    except (UsageError, ConfigError, dataio.InsufficientData, dataio.NonContiguousDates) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return USAGE_EXIT
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return USAGE_EXIT
    except Exception as exc:  # runtime failure
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return RUNTIME_EXIT


if __name__ == "__main__":
    sys.exit(main())
