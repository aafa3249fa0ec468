"""Command-line entry point: ``mvembed {train,synth,eval,report}``.

Exit status is 0 on success, 2 for unreadable inputs or invalid arguments,
and 3 when a solver rejects its input.
"""

import argparse
import configparser
import logging
import sys
import time
from pathlib import Path

import numpy as np

from . import cca2, dgcca, eval as ev, io, maxvar, sumcor, synth
from .errors import MvembedError

log = logging.getLogger("mvembed")

SOLVERS = ("cca-svd", "cca-eig", "gcca", "mvlsa", "lascca", "dgcca")
STOCHASTIC = ("lascca", "dgcca")

# flag name -> (config key, parser)
TRAIN_KEYS = {
    "k": int, "ridge": float, "weights": str, "epochs": int, "cg_iters": int,
    "cg_tol": float, "robust": None, "seed": int, "per_view_rank": str,
    "scale_by_sv": None, "center": None, "scale": None, "hidden": str,
    "output_width": int, "step": float,
}


class UsageError(Exception):
    pass


def _parse_bool(text):
    lowered = str(text).strip().lower()
    if lowered in ("1", "true", "yes", "on"):
        return True
    if lowered in ("0", "false", "no", "off"):
        return False
    raise UsageError(f"not a boolean: {text!r}")


def _int_list(text):
    return [int(t) for t in str(text).split(",") if t.strip()]


def _float_list(text):
    return [float(t) for t in str(text).split(",") if t.strip()]


def load_config(path, solver):
    """Flat ``key = value`` pairs from the ``[train]`` and ``[<solver>]`` sections."""
    parser = configparser.ConfigParser()
    try:
        with open(path, encoding="utf-8") as fh:
            parser.read_file(fh)
    except (OSError, configparser.Error) as exc:
        raise io.FormatError(path, getattr(exc, "lineno", 0) or 0, str(exc)) from None
    values = {}
    for section in ("train", solver):
        if parser.has_section(section):
            for key, raw in parser.items(section):
                key = key.replace("-", "_")
                if key == "solver":
                    continue
                if key not in TRAIN_KEYS:
                    raise io.FormatError(path, 0, f"unknown key {key!r} in [{section}]")
                conv = TRAIN_KEYS[key]
                try:
                    values[key] = _parse_bool(raw) if conv is None else conv(raw)
                except (ValueError, UsageError):
                    raise io.FormatError(path, 0, f"bad value for {key}: {raw!r}") from None
    return values


def _settings(args):
    cfg = {}
    if args.config:
        cfg.update(load_config(args.config, args.solver))
    for key in TRAIN_KEYS:
        value = getattr(args, key, None)
        if value is not None:
            cfg[key] = value
    return cfg


# ---------------------------------------------------------------- train

def _read_views(paths):
    return [io.read_matrix(p) for p in paths]


def _dense(X):
    return X.toarray() if hasattr(X, "toarray") else X


def _norm(cfg, default_center, default_scale):
    return cca2.NormalizationSpec(center=cfg.get("center", default_center),
                                  scale=cfg.get("scale", default_scale))


def _train_cca(views, masks, cfg, solver):
    if len(views) != 2:
        raise UsageError("two-view CCA needs exactly two view files")
    if masks is not None and not all(np.all(m) for m in masks):
        raise UsageError("two-view CCA does not support masked examples")
    X, Y = (_dense(v) for v in views)
    fit = cca2.fit_cca_svd if solver == "cca-svd" else cca2.fit_cca_hotelling
    model = fit(X, Y, cfg.get("k"), cfg.get("ridge", cca2.DEFAULT_RIDGE), _norm(cfg, True, True))
    zx, zy = cca2.project(model, 1, X), cca2.project(model, 2, Y)
    report = [
        ("correlations", " ".join(io.fmt(c) for c in model.correlations)),
        ("embedding", "mean of the two views' canonical variates"),
    ]
    return 0.5 * (zx + zy), [model.U, model.V], report, {}


def _gcca_config(cfg, n_views, weights=None):
    if "k" not in cfg:
        raise UsageError("--k is required")
    if weights is None and "weights" in cfg:
        weights = _float_list(cfg["weights"])
        if len(weights) != n_views:
            raise UsageError(f"--weights has {len(weights)} entries for {n_views} views")
    rank = cfg.get("per_view_rank")
    if rank is not None:
        rank = _int_list(rank)
        rank = rank[0] if len(rank) == 1 else rank
    return maxvar.GccaConfig(
        k=cfg["k"], view_weights=weights, ridge=cfg.get("ridge", 1e-8),
        per_view_rank=rank, scale_by_sv=cfg.get("scale_by_sv", False),
        norm=_norm(cfg, False, False))


def _train_gcca(views, masks, cfg, solver, weights=None):
    views = [_dense(v) for v in views]
    gcfg = _gcca_config(cfg, len(views), weights)
    fit = maxvar.fit_gcca_exact if solver == "gcca" else maxvar.fit_gcca_mvlsa
    model = fit(views, masks, gcfg)
    objective = maxvar.gcca_objective(model, views, masks)
    w = gcfg.weights(len(views))
    report = [
        ("view_weights", " ".join(io.fmt(x) for x in w)),
        ("eigenvalues", " ".join(io.fmt(x) for x in model.eigenvalues)),
        ("objective", io.fmt(objective)),
        ("scale_by_sv", str(gcfg.scale_by_sv).lower()),
    ]
    return model.G, model.U, report, {}


def _train_lascca(views, masks, cfg, per_view_outputs):
    if "k" not in cfg:
        raise UsageError("--k is required")
    lcfg = sumcor.LasccaConfig(
        k=cfg["k"], epochs=cfg.get("epochs", 100), cg_max_iters=cfg.get("cg_iters", 20),
        cg_rel_tol=cfg.get("cg_tol", 1e-5), robust=cfg.get("robust", True), seed=cfg["seed"])
    model = sumcor.fit_lascca(views, masks, lcfg)
    prop = sumcor.proportion_correlation(model, views, masks)
    report = [
        ("robust", str(lcfg.robust).lower()),
        ("initial_objective", io.fmt(model.initial_objective)),
        ("objective_trace", " ".join(io.fmt(x) for x in model.objective_trace)),
        ("proportion_correlation_captured", io.fmt(prop)),
        ("embedding", "mask-weighted mean of the per-view projections X_i U_i "
                      "(use --per-view-outputs for each view's variates)"),
    ]
    extra = {}
    if per_view_outputs:
        extra = {f"variates_{i}.tsv": G for i, G in enumerate(model.G)}
    return sumcor.consensus_embedding(model, views, masks), model.U, report, extra


def _train_dgcca(views, masks, cfg, arch_rng=None):
    if masks is not None and not all(np.all(m) for m in masks):
        raise UsageError("dgcca does not support masked examples")
    views = [_dense(v) for v in views]
    if arch_rng is not None:
        hidden, out_width, r = dgcca.sample_architecture(arch_rng)
        hidden = [hidden]
    else:
        hidden = _int_list(cfg.get("hidden", ""))
        out_width = cfg.get("output_width")
        r = cfg.get("k")
        if r is None:
            raise UsageError("--k (the shared dimension r) is required")
        if out_width is None:
            out_width = r
    specs = [dgcca.MlpSpec(tuple([X.shape[1]] + list(hidden) + [out_width]))
             for X in views]
    model = dgcca.train_dgcca(views, specs, r, cfg.get("epochs", 100),
                              cfg.get("step", 1e-2), cfg["seed"], cfg.get("ridge", 1e-8))
    report = [
        ("architecture", " | ".join("x".join(map(str, s.layer_widths)) for s in specs)),
        ("r", str(r)),
        ("reconstruction_trace", " ".join(io.fmt(x) for x in model.train_trace)),
    ]
    extra = {}
    for j, net in enumerate(model.networks):
        for li, W in enumerate(net.weights):
            extra[f"network_{j}_layer_{li}.tsv"] = W
    return model.G, model.U, report, extra


def _write_run(out, solver, seed, cfg, result, elapsed, report_timing):
    embedding, maps, report, extra = result
    out.mkdir(parents=True, exist_ok=True)
    io.write_embedding(out / "embedding.tsv", embedding, solver, seed)
    for i, U in enumerate(maps):
        io.write_matrix(out / f"map_{i}.tsv", U)
    for name, M in extra.items():
        io.write_matrix(out / name, M)
    lines = [f"solver: {solver}", f"seed: {'none' if seed is None else seed}",
             f"dims: {embedding.shape[1]}"]
    lines += [f"config.{k}: {cfg[k]}" for k in sorted(cfg)]
    lines += [f"{key}: {value}" for key, value in report]
    if report_timing:
        lines.append(f"wall_time_seconds: {elapsed:.3f}")
    (out / "report.txt").write_text("\n".join(lines) + "\n", encoding="utf-8")


def cmd_train(args):
    solver = args.solver
    cfg = _settings(args)
    seed = cfg.get("seed")
    if solver in STOCHASTIC and seed is None:
        raise UsageError(f"--seed is required for {solver}")
    views = _read_views(args.views)
    masks = io.read_masks(args.mask) if args.mask else None
    out = Path(args.out)

    runs = []
    if args.weight_sweep:
        if solver not in ("gcca", "mvlsa"):
            raise UsageError("--weight-sweep applies to gcca and mvlsa only")
        for w in maxvar.weight_sweep_grid(len(views)):
            name = "w_" + "_".join(f"{x:g}" for x in w)
            runs.append((out / name, dict(cfg, weights=",".join(f"{x:g}" for x in w)), w))
    else:
        runs.append((out, cfg, None))

    for run_out, run_cfg, weights in runs:
        start = time.perf_counter()
        if solver in ("cca-svd", "cca-eig"):
            result = _train_cca(views, masks, run_cfg, solver)
        elif solver in ("gcca", "mvlsa"):
            result = _train_gcca(views, masks, run_cfg, solver, weights)
        elif solver == "lascca":
            result = _train_lascca(views, masks, run_cfg, args.per_view_outputs)
        else:
            rng = np.random.default_rng(seed) if args.arch_sample else None
            result = _train_dgcca(views, masks, run_cfg, rng)
        elapsed = time.perf_counter() - start
        _write_run(run_out, solver, seed, run_cfg, result, elapsed, args.report_timing)
        log.info("trained %s in %.3fs (seed=%s) -> %s", solver, elapsed, seed, run_out)
    return 0


# ---------------------------------------------------------------- synth

def cmd_synth(args):
    if args.seed is None:
        raise UsageError("--seed is required for synth")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    try:
        if args.kind == "missing-views":
            spec = synth.MissingViewSpec(
                n=args.n or 10_000, n_latent=args.latent_dim or 100, active=args.active,
                n_views=args.views, density=args.density, rho=args.rho, seed=args.seed)
            views, masks, truth = synth.gen_missing_views(spec)
            for i, X in enumerate(views):
                io.write_matrix(out / f"view_{i}.tsv", X)
            io.write_masks(out / "masks.tsv", masks)
            io.write_matrix(out / "latent.tsv", truth.latent)
        elif args.kind == "prob-cca":
            spec = synth.ProbCcaSpec(n=args.n or 1000, k=args.latent_dim or 2, p=args.p,
                                     q=args.q, sigma=1.0 if args.sigma is None else args.sigma,
                                     seed=args.seed)
            X, Y, truth = synth.gen_prob_cca(spec)
            io.write_matrix(out / "view_0.tsv", X)
            io.write_matrix(out / "view_1.tsv", Y)
            io.write_matrix(out / "latent.tsv", truth.z)
        else:
            spec = synth.RetrievalSpec(n=args.n or 1000, clusters=args.clusters,
                                       sigma=0.05 if args.sigma is None else args.sigma,
                                       dim=args.dim,
                                       exemplars=args.exemplars, seed=args.seed)
            points, labels, tasks = synth.gen_retrieval(spec)
            io.write_embedding(out / "embedding.tsv", points, "synth-retrieval", args.seed)
            io.write_tasks(out / "tasks.tsv", tasks)
            io.write_matrix(out / "labels.tsv", labels[:, None].astype(float))
    except MvembedError as exc:
        raise UsageError(f"invalid synth spec: {exc}") from None
    return 0


# ---------------------------------------------------------------- eval / report

def _rank_all(args):
    emb = io.read_embedding(args.embedding)
    tasks = io.read_tasks(args.tasks, emb.values.shape[0])
    E = ev.zscore(emb.values)[0] if args.zscore else emb.values
    return tasks, [ev.rank_by_centroid(E, t) for t in tasks]


def cmd_eval(args):
    tasks, rankings = _rank_all(args)
    report = ev.score_rankings(tasks, rankings, _int_list(args.ks))
    io.write_report_table(args.out, report)
    return 0


def cmd_report(args):
    tasks, rankings = _rank_all(args)
    ks = _int_list(args.ks)
    curve = ev.pr_curve(tasks, rankings, ks)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    io.write_curve(out / "precision_at_k.tsv", curve[:, 0], curve[:, 1], ("k", "precision"))
    io.write_curve(out / "recall_at_k.tsv", curve[:, 0], curve[:, 2], ("k", "recall"))
    return 0


# ---------------------------------------------------------------- parser

def build_parser():
    p = argparse.ArgumentParser(prog="mvembed", description="Multiview embedding toolkit")
    sub = p.add_subparsers(dest="command", required=True)

    t = sub.add_parser("train", help="fit a solver on view matrix files")
    t.add_argument("views", nargs="+", help="MatrixFile per view")
    t.add_argument("--solver", required=True, choices=SOLVERS)
    t.add_argument("--out", required=True)
    t.add_argument("--mask", help="MaskFile with one column per view")
    t.add_argument("--config", help="INI file with [train] and [<solver>] sections")
    t.add_argument("--k", type=int)
    t.add_argument("--ridge", type=float)
    t.add_argument("--weights", help="comma-separated view weights")
    t.add_argument("--epochs", type=int)
    t.add_argument("--cg-iters", dest="cg_iters", type=int)
    t.add_argument("--cg-tol", dest="cg_tol", type=float)
    t.add_argument("--robust", action=argparse.BooleanOptionalAction, default=None)
    t.add_argument("--seed", type=int)
    t.add_argument("--per-view-rank", dest="per_view_rank",
                   help="MV-LSA rank (one value or one per view)")
    t.add_argument("--scale-by-sv", dest="scale_by_sv",
                   action=argparse.BooleanOptionalAction, default=None)
    t.add_argument("--center", action=argparse.BooleanOptionalAction, default=None)
    t.add_argument("--scale", action=argparse.BooleanOptionalAction, default=None)
    t.add_argument("--hidden", help="dgcca hidden widths, comma-separated")
    t.add_argument("--output-width", dest="output_width", type=int)
    t.add_argument("--step", type=float, help="dgcca gradient step size")
    t.add_argument("--weight-sweep", action="store_true",
                   help="train every weighting over {0, 0.25, 1} (gcca/mvlsa)")
    t.add_argument("--arch-sample", action="store_true",
                   help="dgcca: draw widths in [10, 1000] and r in [10, c2] from the seed")
    t.add_argument("--per-view-outputs", action="store_true",
                   help="lascca: also write each view's auxiliary variates")
    t.add_argument("--report-timing", action="store_true",
                   help="include wall time in report.txt (breaks byte-identical reruns)")
    t.set_defaults(func=cmd_train)

    s = sub.add_parser("synth", help="write a synthetic fixture")
    s.add_argument("--kind", required=True, choices=("missing-views", "prob-cca", "retrieval"))
    s.add_argument("--out", required=True)
    s.add_argument("--seed", type=int)
    s.add_argument("--n", type=int)
    s.add_argument("--rho", type=float, default=0.0)
    s.add_argument("--latent-dim", dest="latent_dim", type=int)
    s.add_argument("--active", type=int, default=5)
    s.add_argument("--views", type=int, default=3)
    s.add_argument("--density", type=float, default=0.10)
    s.add_argument("--p", type=int, default=10)
    s.add_argument("--q", type=int, default=10)
    s.add_argument("--sigma", type=float,
                   help="noise scale (default 1.0 for prob-cca, 0.05 for retrieval)")
    s.add_argument("--clusters", type=int, default=5)
    s.add_argument("--dim", type=int)
    s.add_argument("--exemplars", type=int, default=10)
    s.set_defaults(func=cmd_synth)

    for name, func, helptext in (("eval", cmd_eval, "score centroid rankings"),
                                 ("report", cmd_report, "write P/R-versus-k plot data")):
        e = sub.add_parser(name, help=helptext)
        e.add_argument("--embedding", required=True)
        e.add_argument("--tasks", required=True)
        e.add_argument("--out", required=True)
        e.add_argument("--zscore", action="store_true")
        e.add_argument("--ks", default=",".join(map(str, ev.DEFAULT_KS)))
        e.set_defaults(func=func)
    return p


def main(argv=None):
    logging.basicConfig(level=logging.INFO, format="%(name)s: %(message)s", stream=sys.stderr)
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except io.FormatError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (UsageError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except MvembedError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
