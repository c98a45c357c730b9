"""Command-line entry point: ``cuebp <subcommand> [options]``.

Any option can also come from ``--config FILE`` holding ``key = value`` lines
(keys spelled like the long flags, with or without dashes); flags given on
the command line win.
"""
from __future__ import annotations

import argparse
import logging
import sys
import warnings
from dataclasses import replace
from pathlib import Path

from . import density as de
from . import harness
from .bp import (BpConfig, default_tf, run_bp_imperfect, run_bp_perfect,
                 select_estimate)
from .ingest import (estimate_pq, knn_graph, load_cue_file, load_edge_list,
                     load_features)
from .model import (IMPERFECT, PERFECT, ModelParams, a_for_lambda, sample_cues_imperfect,
                    sample_cues_perfect, sample_graph, write_edge_list,
                    write_id_list)
from .ppr import PprConfig, personalized_pagerank, ppr_estimate
from .rng import derive_seed

log = logging.getLogger("cuebp")


class CliError(Exception):
    pass


def read_config(path: str | Path) -> dict[str, str]:
    out = {}
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        if "=" not in body:
            raise CliError(f"{path}:{lineno}: expected key = value")
        key, value = (s.strip() for s in body.split("=", 1))
        out[key.lstrip("-").replace("-", "_")] = value
    return out


def _floats(text: str) -> list[float]:
    return [float(x) for x in text.replace(",", " ").split()]


def _add_model_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--n", type=int)
    p.add_argument("--kappa", type=float)
    p.add_argument("--b", type=float)
    p.add_argument("--alpha", type=float, default=0.0)
    p.add_argument("--beta", type=float, default=1.0)
    g = p.add_mutually_exclusive_group()
    g.add_argument("--a", type=float)
    g.add_argument("--lam", type=float, help="community SNR")
    g.add_argument("--lam-alpha", type=float, help="SNR of the uncued members")


def _add_detect_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--graph", help="edge list")
    p.add_argument("--cues", help="cue id list")
    p.add_argument("--K", type=int, help="community size")
    p.add_argument("--nodes", type=int, help="node count (default from the edge list)")
    p.add_argument("--mode", choices=(PERFECT, IMPERFECT), default=PERFECT)
    p.add_argument("--scores", default="scores.tsv")
    p.add_argument("--members", default="members.txt")
    p.add_argument("--metadata", help="JSON sidecar (default <scores>.json)")
    p.add_argument("--seed", type=int)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="cuebp", description=__doc__.splitlines()[0])
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="sample a planted graph with cues")
    g.add_argument("--config")
    _add_model_args(g)
    g.add_argument("--seed", type=int)
    g.add_argument("--out-dir", default=".")
    g.add_argument("--max-directed-edges", type=int, default=harness.DEFAULT_EDGE_CAP)

    b = sub.add_parser("detect-bp", help="belief propagation detector")
    b.add_argument("--config")
    _add_detect_args(b)
    b.add_argument("--tf", type=int)
    b.add_argument("--p", type=float, help="within-community edge probability")
    b.add_argument("--q", type=float, help="background edge probability")
    b.add_argument("--alpha", type=float, help="cue fraction (default |C|/K)")
    b.add_argument("--beta", type=float, default=0.8,
                   help="cue reliability (imperfect mode)")

    r = sub.add_parser("detect-ppr", help="personalised PageRank baseline")
    r.add_argument("--config")
    _add_detect_args(r)
    r.add_argument("--damping", type=float, default=0.9)
    r.add_argument("--tol", type=float, default=1e-10)
    r.add_argument("--max-iters", type=int, default=1000)

    d = sub.add_parser("de", help="density evolution")
    d.add_argument("--config")
    d.add_argument("--mode", choices=("perfect", "imperfect", "population"),
                   default="perfect")
    d.add_argument("--kappa", type=float)
    d.add_argument("--alpha", type=float, default=0.0)
    d.add_argument("--beta", type=float, default=1.0)
    lg = d.add_mutually_exclusive_group()
    lg.add_argument("--lam", type=float)
    lg.add_argument("--lam-alpha", type=float)
    d.add_argument("--a", type=float)
    d.add_argument("--b", type=float)
    d.add_argument("--t-max", type=int, default=200)
    d.add_argument("--quad-nodes", type=int, default=80)
    d.add_argument("--pop-size", type=int, default=100_000)
    d.add_argument("--seed", type=int)
    d.add_argument("--out", default="-")

    s = sub.add_parser("sweep", help="Monte-Carlo sweep over one parameter")
    s.add_argument("--config")
    _add_model_args(s)
    s.add_argument("--param", choices=("alpha", "beta", "lam", "lam_alpha", "a", "b",
                                       "kappa", "n", "tf"))
    s.add_argument("--values", help="comma separated grid")
    s.add_argument("--trials", type=int, default=10)
    s.add_argument("--algos", default="bp", help="comma list of bp, ppr")
    s.add_argument("--tf", type=int)
    s.add_argument("--damping", type=float, default=0.9)
    s.add_argument("--seed", type=int)
    s.add_argument("--workers", type=int, default=1)
    s.add_argument("--no-timing", action="store_true",
                   help="write 0 for wall time so reruns are byte-identical")
    s.add_argument("--max-directed-edges", type=int, default=harness.DEFAULT_EDGE_CAP)
    s.add_argument("--out", default="-")
    s.add_argument("--trials-out", help="per-trial rows")

    k = sub.add_parser("build-knn", help="k-nearest-neighbour graph from a feature CSV")
    k.add_argument("--config")
    k.add_argument("--features")
    k.add_argument("--k", type=int, default=3)
    k.add_argument("--out", default="graph.txt")
    ap.set_defaults(_subparsers={"generate": g, "detect-bp": b, "detect-ppr": r,
                                 "de": d, "sweep": s, "build-knn": k})
    return ap


_DEGREE_KEYS = ("a", "lam", "lam_alpha")
_TRUE = {"1", "true", "yes", "on"}
_FALSE = {"0", "false", "no", "off"}


def _convert(action: argparse.Action, value: str):
    if isinstance(action, (argparse._StoreTrueAction, argparse._StoreFalseAction)):
        v = value.lower()
        if v not in _TRUE | _FALSE:
            raise CliError(f"{action.dest}: expected a boolean, got {value!r}")
        return v in _TRUE
    return action.type(value) if action.type else value


def parse(argv) -> argparse.Namespace:
    ap = build_parser()
    args = ap.parse_args(argv)
    if getattr(args, "config", None):
        conf = read_config(args.config)
        sp = args._subparsers[args.command]
        known = {a.dest: a for a in sp._actions if a.dest not in ("help", "config")}
        # a, lam and lam_alpha are alternatives: one on the command line
        # overrides whichever of them the file sets
        if any(getattr(args, k, None) is not None for k in _DEGREE_KEYS):
            conf = {k: v for k, v in conf.items() if k not in _DEGREE_KEYS}
        for key in conf:
            if key not in known:
                raise CliError(f"unknown config key {key!r} for {args.command}")
        try:
            sp.set_defaults(**{key: _convert(known[key], v) for key, v in conf.items()})
        except ValueError as exc:
            raise CliError(f"{args.config}: {exc}") from None
        args = ap.parse_args(argv)
    return args


def _need(args, *names):
    missing = [n for n in names if getattr(args, n, None) is None]
    if missing:
        raise CliError("missing required option(s): "
                       + ", ".join("--" + m.replace("_", "-") for m in missing))


def _emit(text: str, dest: str) -> None:
    if dest == "-":
        sys.stdout.write(text)
    else:
        Path(dest).write_text(text)


def _trial_config(args, **extra) -> harness.TrialConfig:
    return harness.TrialConfig(
        n=args.n, kappa=args.kappa, b=args.b, alpha=args.alpha, beta=args.beta,
        a=args.a, lam=args.lam, lam_alpha=args.lam_alpha, seed=args.seed, **extra)


def cmd_generate(args) -> None:
    _need(args, "n", "kappa", "b", "seed")
    cfg = _trial_config(args, max_directed_edges=args.max_directed_edges)
    P = cfg.params()
    harness.check_budget(P, cfg.max_directed_edges)
    graph, truth = sample_graph(P, derive_seed(args.seed, 0, "graph"))
    cue_seed = derive_seed(args.seed, 0, "cues")
    if P.beta == 1.0:
        cues = sample_cues_perfect(truth, P.alpha, cue_seed)
    else:
        cues = sample_cues_imperfect(truth, P.alpha, P.beta, cue_seed)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_edge_list(graph, out / "graph.txt",
                    header=f"n={P.n} K={P.K} a={P.a!r} b={P.b!r} seed={args.seed}")
    write_id_list(truth.members, out / "truth.txt")
    write_id_list(cues.cues, out / "cues.txt")
    resolved = harness.config_dict(cfg) | {"K": P.K, "a_resolved": P.a,
                                           "edges": graph.num_edges,
                                           "cues": cues.count}
    harness.write_metadata(out / "generate.json", "generate", resolved)
    log.info("wrote %d edges, K=%d, %d cues to %s", graph.num_edges, P.K,
             cues.count, out)


def _load_detection_inputs(args):
    _need(args, "graph", "cues", "K", "seed")
    graph = load_edge_list(args.graph, n=args.nodes)
    cues = load_cue_file(args.cues, graph.n)
    if not 1 <= args.K < graph.n:
        raise CliError(f"--K must lie in [1, {graph.n})")
    if args.mode == PERFECT and cues.count >= args.K:
        raise CliError("perfect-cue detection needs fewer cues than K")
    return graph, cues


def _write_scores(args, scores, members, resolved) -> None:
    with open(args.scores, "w") as fh:
        for i, s in enumerate(scores):
            fh.write(f"{i}\t{float(s)!r}\n")
    write_id_list(members, args.members)
    harness.write_metadata(args.metadata or args.scores + ".json", args.command,
                           resolved)


def cmd_detect_bp(args) -> None:
    graph, cues = _load_detection_inputs(args)
    n, K = graph.n, args.K
    p, q = args.p, args.q
    if p is None or q is None:
        p_hat, q_hat = estimate_pq(graph, cues.c)
        p = p_hat if p is None else p
        q = q_hat if q is None else q
    if not p > q > 0:
        raise CliError(f"need p > q > 0, got p={p}, q={q}")
    alpha = args.alpha if args.alpha is not None else cues.count / K
    beta = 1.0 if args.mode == PERFECT else args.beta
    P = ModelParams(n=n, kappa=K / n, a=p * n, b=q * n, alpha=alpha, beta=beta)
    tf = args.tf if args.tf is not None else default_tf(n, p)
    cfg = BpConfig.from_params(P, args.mode, t_f=tf)
    runner = run_bp_perfect if args.mode == PERFECT else run_bp_imperfect
    if args.mode == IMPERFECT:
        cues = type(cues)(cues.c, IMPERFECT, beta)
    beliefs = runner(graph, cues, P, cfg).beliefs
    members = select_estimate(beliefs, cues.c, K, args.mode)
    _write_scores(args, beliefs, members,
                  {"graph": args.graph, "cues": args.cues, "K": K, "n": n,
                   "p": p, "q": q, "alpha": alpha, "beta": beta, "tf": tf,
                   "mode": args.mode, "seed": args.seed})


def cmd_detect_ppr(args) -> None:
    graph, cues = _load_detection_inputs(args)
    cfg = PprConfig(args.damping, args.tol, args.max_iters)
    scores = personalized_pagerank(graph, cues.c, cfg)
    members = ppr_estimate(scores, cues.c, args.K, args.mode)
    _write_scores(args, scores, members,
                  {"graph": args.graph, "cues": args.cues, "K": args.K,
                   "n": graph.n, "damping": args.damping, "tol": args.tol,
                   "mode": args.mode, "seed": args.seed})


def cmd_de(args) -> None:
    _need(args, "kappa")
    if args.lam is None and args.lam_alpha is None:
        raise CliError("give --lam or --lam-alpha")
    a = args.a
    if args.mode == "population":
        _need(args, "b", "seed")
        if a is None:
            if args.lam is not None:
                a = a_for_lambda(args.b, args.kappa, args.lam)
            else:
                a = a_for_lambda(args.b, args.kappa, args.lam_alpha,
                                 alpha_for_lambda_alpha=args.alpha)
    cfg = de.DEConfig(kappa=args.kappa, alpha=args.alpha, beta=args.beta,
                      lam=args.lam, lam_alpha=args.lam_alpha, t_max=args.t_max,
                      quad_nodes=args.quad_nodes, pop_size=args.pop_size,
                      a=a, b=args.b)
    rows = harness.run_de(cfg, args.mode, seed=args.seed)
    _emit(harness.rows_to_csv(rows, harness.DE_COLUMNS[args.mode]), args.out)
    if args.out != "-":
        harness.write_metadata(args.out + ".json", "de",
                               harness.config_dict(cfg) | {"mode": args.mode,
                                                           "seed": args.seed})


def cmd_sweep(args) -> None:
    _need(args, "n", "kappa", "b", "seed", "param", "values")
    base = _trial_config(args, tf=args.tf, damping=args.damping,
                         max_directed_edges=args.max_directed_edges,
                         timing=not args.no_timing)
    values = _floats(args.values)
    if args.param in ("n", "tf"):
        values = [int(v) for v in values]
    if args.param in ("lam", "lam_alpha", "a"):
        # the swept quantity replaces whichever one the base config carried
        base = replace(base, a=None, lam=None, lam_alpha=None,
                       **{args.param: values[0]})
    algos = [a.strip() for a in args.algos.split(",") if a.strip()]
    points = harness.run_sweep(base, args.param, values, trials=args.trials,
                               algos=algos, workers=args.workers)
    _emit(harness.rows_to_csv([p.summary() for p in points],
                              harness.SUMMARY_COLUMNS), args.out)
    if args.trials_out:
        rows = [r for p in points for r in p.rows]
        Path(args.trials_out).write_text(
            harness.rows_to_csv(rows, harness.TRIAL_COLUMNS))
    if args.out != "-":
        harness.write_metadata(args.out + ".json", "sweep",
                               harness.config_dict(base) | {
                                   "param": args.param, "values": values,
                                   "trials": args.trials, "algos": algos})


def cmd_build_knn(args) -> None:
    _need(args, "features")
    X = load_features(args.features)
    graph = knn_graph(X, args.k)
    write_edge_list(graph, args.out, header=f"{args.k}-NN graph of {args.features}")
    log.info("wrote %d edges on %d nodes to %s", graph.num_edges, graph.n, args.out)


COMMANDS = {"generate": cmd_generate, "detect-bp": cmd_detect_bp,
            "detect-ppr": cmd_detect_ppr, "de": cmd_de, "sweep": cmd_sweep,
            "build-knn": cmd_build_knn}


def main(argv=None) -> int:
    try:
        args = parse(argv)
    except CliError as exc:
        print(f"cuebp: error: {exc}", file=sys.stderr)
        return 2
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("default")
            COMMANDS[args.command](args)
    except (CliError, ValueError, OSError, FloatingPointError) as exc:
        print(f"cuebp {args.command}: error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
