"""Command line interface.

Verbs: simulate, fit, impute, analyze, tip, diagnose, run.  Every verb
is deterministic given its inputs and seeds; fit output directories
carry a manifest with content hashes so reruns can be compared byte
for byte.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import pickle
import sys
from pathlib import Path

import numpy as np
import pandas as pd

from . import __version__
from .analyze import pool_mi_ancova, tipping_point
from .data import read_long
from .impute import KINDS, ImputationStrategy, generate_mi_sets
from .modelspec import ModelSpec
from .oracles import SyntheticScenario, chain_diagnostics, generate_scenario
from .priors import PriorConfig, resolve_pc_lambda
from .sampler import SamplerConfig, compute_dic, run_chain

_PICKLE_PROTOCOL = 4


def _load_json(path) -> dict:
    with open(path) as fh:
        return json.load(fh)


def _dump_json(obj, path) -> None:
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _sha256(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _write_manifest(outdir: Path) -> None:
    entries = {
        f.name: _sha256(f)
        for f in sorted(outdir.iterdir())
        if f.is_file() and f.name != "manifest.json"
    }
    _dump_json(entries, outdir / "manifest.json")


def _parse_delta(text: str):
    """Scalar, comma-separated per-visit vector, or JSON array."""
    if text is None:
        return 0.0
    text = text.strip()
    if text.startswith("["):
        return np.asarray(json.loads(text), dtype=float)
    if "," in text:
        return np.asarray([float(v) for v in text.split(",")], dtype=float)
    return float(text)


def _parse_grid(text: str) -> list:
    return [float(v) for v in text.split(",")]


# ---------------------------------------------------------------------------
# verb implementations
# ---------------------------------------------------------------------------


def _cmd_simulate(args) -> int:
    cfg = _load_json(args.config)
    sc = SyntheticScenario(
        n_tot=int(cfg["n"]),
        alpha=np.asarray(cfg["alpha"], dtype=float),
        sigma=np.asarray(cfg["sigma"], dtype=float),
        psi=np.asarray(cfg["psi"], dtype=float),
        nu=float(cfg.get("nu", math.inf)),
        dropout=cfg.get("dropout", "none"),
        dropout_rate=float(cfg.get("dropout_rate", 0.0)),
        intermittent_rate=float(cfg.get("intermittent_rate", 0.0)),
        n_baseline=int(cfg.get("n_baseline", 1)),
        treatment=bool(cfg.get("treatment", True)),
    )
    seed = int(cfg.get("seed", 0)) if args.seed is None else args.seed
    ds, truth = generate_scenario(sc, seed=seed)

    base_names = [f"baseline_{k + 1}" for k in range(sc.n_baseline)]
    covs = base_names + (["treatment"] if sc.treatment else [])
    rows = {
        "subject": np.repeat(ds.subjects, ds.p),
        "visit": np.tile(np.arange(1, ds.p + 1), ds.n_tot),
        "y": ds.y.ravel(),
    }
    for k, name in enumerate(covs):
        rows[name] = np.repeat(ds.x[:, k + 1], ds.p)
    pd.DataFrame(rows).to_csv(args.out, index=False)
    print(f"wrote {args.out}: {ds.n_tot} subjects x {ds.p} visits, "
          f"dropout fraction {truth['dropout_fraction']:.3f}")
    return 0


def _spec_from_config(cfg: dict):
    model = cfg.get("model", {})
    return {
        "subject": model.get("subject", "subject"),
        "visit": model.get("visit", "visit"),
        "outcome": model.get("outcome", "y"),
        "x": model.get("x"),
        "z": model.get("z"),
        "treatment": model.get("treatment"),
        "intercept": bool(model.get("intercept", True)),
        "variant": model.get("variant", "st"),
    }


def _prior_from_config(cfg: dict) -> PriorConfig:
    pc = dict(cfg.get("prior", {}))
    for key in ("alpha0", "m_mat", "eta0", "v_eta0", "aw_fixed"):
        if pc.get(key) is not None:
            pc[key] = np.asarray(pc[key], dtype=float)
    return PriorConfig(**pc)


def _sampler_from_config(cfg: dict, seed_override) -> SamplerConfig:
    sc = dict(cfg.get("sampler", {}))
    if seed_override is not None:
        sc["seed"] = seed_override
    return SamplerConfig(**sc)


def _cmd_fit(args) -> int:
    cfg = _load_json(args.config)
    mo = _spec_from_config(cfg)
    ds, x_names, z_names = read_long(
        args.data,
        subject=mo["subject"],
        visit=mo["visit"],
        outcome=mo["outcome"],
        x=mo["x"],
        z=mo["z"],
        treatment=mo["treatment"],
        intercept=mo["intercept"],
    )
    spec = ModelSpec(
        variant=mo["variant"],
        p=ds.p,
        x_names=tuple(x_names),
        z_names=tuple(z_names),
        treatment=mo["treatment"],
    )
    prior = _prior_from_config(cfg)
    scfg = _sampler_from_config(cfg, args.seed)

    store = run_chain(ds, spec, prior=prior, cfg=scfg)
    dic = compute_dic(store, ds, spec)

    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    store.to_csv(outdir / "draws.csv")
    with open(outdir / "fit.pkl", "wb") as fh:
        pickle.dump({"store": store, "data": ds, "spec": spec, "prior": prior},
                    fh, protocol=_PICKLE_PROTOCOL)
    _dump_json(
        {"dic": dic.dic, "mean_deviance": dic.mean_deviance,
         "deviance_at_mean": dic.deviance_at_mean, "p_d": dic.p_d},
        outdir / "dic.json",
    )
    chain_diagnostics(store.as_table()).to_csv(outdir / "diagnostics.csv", index=False)
    meta = {
        "version": __version__,
        "config": cfg,
        "n_subjects": int(ds.n_tot),
        "n_visits": int(ds.p),
        "pattern_counts": {str(k): int(v) for k, v in ds.pattern_counts.items()},
        "pc_lambda": resolve_pc_lambda(prior, ds.p) if spec.has_tails else None,
        "mh_acceptance": store.meta.get("mh_acceptance"),
        "mh_scale_final": store.meta.get("mh_scale_final"),
        "seed": scfg.seed,
    }
    _dump_json(meta, outdir / "meta.json")
    _write_manifest(outdir)
    acc = store.meta.get("mh_acceptance")
    acc_txt = f", nu acceptance {acc:.3f}" if acc is not None else ""
    print(f"fit written to {outdir} (DIC {dic.dic:.2f}{acc_txt})")
    return 0


def _load_fit(path):
    with open(path, "rb") as fh:
        bundle = pickle.load(fh)
    return bundle["store"], bundle["data"], bundle["spec"]


def _strategy_from_args(args) -> ImputationStrategy:
    return ImputationStrategy(
        kind=args.strategy,
        delta_control=_parse_delta(args.delta_control),
        delta_treated=_parse_delta(args.delta_treated),
        conditional=not args.marginal_delta,
    )


def _cmd_impute(args) -> int:
    store, ds, spec = _load_fit(args.fit)
    strat = _strategy_from_args(args)
    sets = generate_mi_sets(store, ds, spec, strat, m=args.m, seed=args.seed)
    stacked = pd.concat([ids.to_long(ds) for ids in sets], ignore_index=True)
    stacked.to_csv(args.out, index=False)
    print(f"wrote {args.out}: {args.m} imputations, strategy {strat.kind}")
    return 0


def _cmd_analyze(args) -> int:
    store, ds, spec = _load_fit(args.fit)
    strat = _strategy_from_args(args)
    sets = generate_mi_sets(store, ds, spec, strat, m=args.m, seed=args.seed)
    res = pool_mi_ancova(sets, ds, spec, level=args.level)
    out = {"strategy": strat.kind, "m": args.m, "seed": args.seed, **res.as_dict()}
    _dump_json(out, args.out)
    print(f"estimate {res.estimate:.4f}  se {res.se:.4f}  df {res.df:.1f}  p {res.p_value:.4g}")
    return 0


def _cmd_tip(args) -> int:
    store, ds, spec = _load_fit(args.fit)
    res = tipping_point(
        store, ds, spec,
        delta_control_grid=_parse_grid(args.control_grid),
        delta_treated_grid=_parse_grid(args.treated_grid),
        m=args.m, seed=args.seed, alpha=args.alpha,
        conditional=not args.marginal_delta,
    )
    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    res.table.to_csv(outdir / "tipping_grid.csv", index=False)
    res.boundary().to_csv(outdir / "tipping_boundary.csv", index=False)
    print(f"wrote tipping grid ({len(res.table)} cells) to {outdir}")
    return 0


def _cmd_diagnose(args) -> int:
    store, _, _ = _load_fit(args.fit)
    table = chain_diagnostics(store.as_table(), max_lag=args.max_lag)
    table.to_csv(args.out, index=False)
    worst = table.loc[~table["constant"], "ess"].min() if (~table["constant"]).any() else float("nan")
    print(f"wrote {args.out}; minimum ESS {worst:.1f}")
    return 0


def _cmd_run(args) -> int:
    # --seed here seeds the imputations; the chain seed comes from the config
    fit_args = argparse.Namespace(**{**vars(args), "seed": None})
    _cmd_fit(fit_args)
    fit_path = Path(args.out) / "fit.pkl"
    store, ds, spec = _load_fit(fit_path)
    strat = _strategy_from_args(args)
    sets = generate_mi_sets(store, ds, spec, strat, m=args.m, seed=args.seed)
    stacked = pd.concat([ids.to_long(ds) for ids in sets], ignore_index=True)
    stacked.to_csv(Path(args.out) / "imputations.csv", index=False)
    res = pool_mi_ancova(sets, ds, spec, level=args.level)
    _dump_json(
        {"strategy": strat.kind, "m": args.m, "seed": args.seed, **res.as_dict()},
        Path(args.out) / "analysis.json",
    )
    _write_manifest(Path(args.out))
    print(f"estimate {res.estimate:.4f}  se {res.se:.4f}  df {res.df:.1f}  p {res.p_value:.4g}")
    return 0


# ---------------------------------------------------------------------------
# argument wiring
# ---------------------------------------------------------------------------


def _add_strategy_args(sp) -> None:
    sp.add_argument("--strategy", choices=KINDS, default="MAR")
    sp.add_argument("--delta-control", default=None, help="scalar or comma-separated per-visit offsets")
    sp.add_argument("--delta-treated", default=None)
    sp.add_argument("--marginal-delta", action="store_true",
                    help="apply offsets to the final values instead of the sequential scale")
    sp.add_argument("--m", type=int, default=20, help="number of imputations")
    sp.add_argument("--seed", type=int, default=0, help="imputation seed")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="stmda",
                                 description="Bayesian MI for longitudinal trials with "
                                             "skewed, heavy-tailed dropout models")
    ap.add_argument("--version", action="version", version=f"stmda {__version__}")
    sub = ap.add_subparsers(dest="verb", required=True)

    sp = sub.add_parser("simulate", help="generate a synthetic trial as long-format CSV")
    sp.add_argument("--config", required=True)
    sp.add_argument("--out", required=True)
    sp.add_argument("--seed", type=int, default=None)
    sp.set_defaults(func=_cmd_simulate)

    sp = sub.add_parser("fit", help="run the MCMC sampler on a long-format CSV")
    sp.add_argument("--data", required=True)
    sp.add_argument("--config", required=True)
    sp.add_argument("--out", required=True, help="output directory")
    sp.add_argument("--seed", type=int, default=None, help="override the config seed")
    sp.set_defaults(func=_cmd_fit)

    sp = sub.add_parser("impute", help="write stacked multiply-imputed datasets")
    sp.add_argument("--fit", required=True, help="path to fit.pkl")
    sp.add_argument("--out", required=True)
    _add_strategy_args(sp)
    sp.set_defaults(func=_cmd_impute)

    sp = sub.add_parser("analyze", help="impute, run the final-visit ANCOVA, pool")
    sp.add_argument("--fit", required=True)
    sp.add_argument("--out", required=True, help="result JSON path")
    sp.add_argument("--level", type=float, default=0.95)
    _add_strategy_args(sp)
    sp.set_defaults(func=_cmd_analyze)

    sp = sub.add_parser("tip", help="delta-adjusted tipping-point grid")
    sp.add_argument("--fit", required=True)
    sp.add_argument("--out", required=True, help="output directory")
    sp.add_argument("--control-grid", required=True, help="comma-separated deltas")
    sp.add_argument("--treated-grid", required=True)
    sp.add_argument("--alpha", type=float, default=0.05)
    sp.add_argument("--marginal-delta", action="store_true")
    sp.add_argument("--m", type=int, default=20)
    sp.add_argument("--seed", type=int, default=0)
    sp.set_defaults(func=_cmd_tip)

    sp = sub.add_parser("diagnose", help="chain summaries and effective sample sizes")
    sp.add_argument("--fit", required=True)
    sp.add_argument("--out", required=True)
    sp.add_argument("--max-lag", type=int, default=50)
    sp.set_defaults(func=_cmd_diagnose)

    sp = sub.add_parser("run", help="fit + impute + analyze in one output directory")
    sp.add_argument("--data", required=True)
    sp.add_argument("--config", required=True)
    sp.add_argument("--out", required=True)
    sp.add_argument("--level", type=float, default=0.95)
    _add_strategy_args(sp)
    sp.set_defaults(func=_cmd_run)

    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
