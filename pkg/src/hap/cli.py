"""Command-line front end: ``hap gen | solve | eval | sweep``.

Exit codes: 0 success, 1 usage, 2 input/parse, 3 numerical failure,
4 non-convergence (the solution is still written).
"""

from __future__ import annotations

import argparse
import itertools
import json
import logging
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict
from pathlib import Path

import numpy as np

from . import io as hio
from .baselines import PointCloud, greedy_hap_traced, hk_means, hk_medians
from .core import (
    LayeredProblem,
    NumericalFailure,
    SolverConfig,
    StructuralError,
    objective,
    solve,
    validate_problem,
)
from .datagen import (
    Gen2DConfig,
    GenSeqConfig,
    gen_2d,
    gen_sequences,
    problem_from_2d,
    problem_from_sequences,
    random_layer_preferences,
    similarity_scale,
)
from .evaluation import (
    OracleTooLarge,
    brute_force_map,
    compare_objectives,
    percent_improvement,
    precision_recall,
    rand_index,
)

log = logging.getLogger("hap")

EXIT_OK, EXIT_USAGE, EXIT_INPUT, EXIT_NUMERIC, EXIT_NOCONV = 0, 1, 2, 3, 4
METHODS = ("hap", "greedy", "hkmedians", "hkmeans")
SWEEP_HEADER = [
    "setting_id", "instance_seed", "n", "layers", "method", "preferences", "objective",
    "cluster_counts", "converged", "iterations", "wall_time", "rand_mean", "top_single", "error",
]
# default preference magnitudes (lo, hi, relative): 2D distances scale with the
# data, so their range is in units of the median |similarity|; sequence
# similarities are log-probabilities and take an absolute range
DEFAULT_PREF_RANGE = {"2d": (0.01, 1.0, True), "seq": (0.5, 6.0, False)}


class UsageError(Exception):
    pass


class InputError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


def _floats(text: str) -> list:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise UsageError(f"expected comma-separated numbers, got {text!r}")


def _ints(text: str) -> list:
    try:
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise UsageError(f"expected comma-separated integers, got {text!r}")


def _seeds(text: str) -> list:
    if "-" in text.strip("-") and "," not in text:
        lo, hi = text.split("-", 1)
        return list(range(int(lo), int(hi) + 1))
    return _ints(text)


# generation

def _add_gen_flags(p):
    p.add_argument("--layers", type=int, default=4, help="2d: number of layers")
    p.add_argument("--total", type=int, default=200, help="2d: approximate total points")
    p.add_argument("--top-std", type=float, default=3.0)
    p.add_argument("--unsquared", action="store_true", help="2d: use -||x-y|| instead of -||x-y||^2")
    p.add_argument("--generations", type=int, default=4, help="seq: tree levels including the root")
    p.add_argument("--length", type=int, default=40)
    p.add_argument("--children-mean", type=float, default=10.0)
    p.add_argument("--mutations-mean", type=float, default=3.0)
    p.add_argument("--max-children", type=int, default=50)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--prefs", help="per-layer preferences, bottom first (absolute)")
    p.add_argument("--pref-range", type=float, nargs=2, metavar=("LO", "HI"),
                   help="draw decreasing per-layer preferences from -[HI, LO]")
    p.add_argument("--relative", action="store_true",
                   help="--pref-range is in units of the median |similarity|")


def _generate(kind: str, args, seed: int):
    if kind == "2d":
        if args.layers < 1 or args.total < 1:
            raise UsageError("--layers and --total must be positive")
        tree = gen_2d(Gen2DConfig(total_points=args.total, num_layers=args.layers,
                                  top_std=args.top_std, rng_seed=seed))
    else:
        if min(args.generations, args.length, args.max_children) < 1:
            raise UsageError("--generations, --length and --max-children must be positive")
        tree = gen_sequences(GenSeqConfig(seq_length=args.length, generations=args.generations,
                                          children_mean=args.children_mean,
                                          mutations_mean=args.mutations_mean,
                                          max_children=args.max_children, rng_seed=seed))
    return tree


def _problem_for(tree, prefs, args) -> LayeredProblem:
    L = tree.depth
    if tree.kind == "2d":
        return problem_from_2d(tree, L, prefs, squared=not args.unsquared)
    return problem_from_sequences(tree, L, prefs, args.mutations_mean)


def _default_prefs(tree, args, seed: int):
    if args.prefs:
        prefs = _floats(args.prefs)
        if len(prefs) != tree.depth:
            raise UsageError(f"--prefs needs {tree.depth} values")
        return np.array(prefs)
    lo, hi = _pref_range(args, tree.kind, _problem_for(tree, 0.0, args))
    rng = np.random.default_rng([seed, 1])
    return random_layer_preferences(rng, tree.depth, lo, hi)


def _pref_range(args, kind, problem):
    """Absolute (low, high) bounds for random preferences."""
    if args.pref_range:
        lo, hi = args.pref_range
        relative = args.relative
    else:
        lo, hi, relative = DEFAULT_PREF_RANGE[kind]
    if lo < 0 or hi < lo:
        raise UsageError("--pref-range takes magnitudes 0 <= LO <= HI")
    scale = similarity_scale(problem) if relative else 1.0
    return -hi * scale, -lo * scale


def cmd_gen(args) -> int:
    tree = _generate(args.kind, args, args.seed)
    prefs = _default_prefs(tree, args, args.seed)
    problem = _problem_for(tree, prefs, args)
    problem.metadata["preferences"] = prefs.tolist()
    out = Path(args.out)
    hio.write_problem(out.with_name(out.name + ".problem.json"), problem)
    hio.write_tree(out.with_name(out.name + ".tree.json"), tree)
    print(f"kind={tree.kind} seed={args.seed} n={tree.num_nodes} layers={tree.depth}")
    print("nodes per layer (bottom first): " + " ".join(str(x) for x in tree.layer_sizes()))
    print("preferences: " + " ".join(f"{x:.4g}" for x in prefs))
    return EXIT_OK


# solving

def _add_solver_flags(p, seed=True):
    p.add_argument("--damping", type=float, default=0.5)
    p.add_argument("--max-iter", type=int, default=2000)
    p.add_argument("--window", type=int, default=50)
    p.add_argument("--schedule", choices=["plain", "fix_bottom"], default="plain")
    p.add_argument("--fix-period", type=int, default=500)
    if seed:
        p.add_argument("--seed", type=int, default=0)
    p.add_argument("--jitter", action="store_true")
    p.add_argument("--last", action="store_true", help="return the final decode instead of the best one seen")
    p.add_argument("--k", help="clusters per layer for hkmedians/hkmeans, bottom first")
    p.add_argument("--restarts", type=int, default=100)
    p.add_argument("--coords", help="tree or coords JSON supplying points for hkmeans")


def _solver_config(args) -> SolverConfig:
    try:
        return SolverConfig(damping=args.damping, max_iterations=args.max_iter,
                            convergence_window=args.window, schedule=args.schedule,
                            fix_period=args.fix_period, rng_seed=args.seed, jitter=args.jitter,
                            keep_best=not args.last)
    except ValueError as exc:
        raise UsageError(str(exc))


def _load_cloud(path) -> PointCloud:
    doc = hio.read_json(path)
    if "coords" in doc:
        return PointCloud(doc["coords"])
    return PointCloud.from_tree(hio.tree_from_doc(doc))


def run_method(method, problem, config, k=None, restarts=100, cloud=None, seed=0):
    """Run one method; returns ``(solution, converged, iterations)``."""
    if method == "hap":
        sol, trace = solve(problem, config)
        return sol, trace.converged, trace.iterations
    if method == "greedy":
        sol, traces = greedy_hap_traced(problem, config)
        return sol, all(t.converged for t in traces), sum(t.iterations for t in traces)
    if k is None:
        raise UsageError(f"{method} needs --k")
    if method == "hkmedians":
        return hk_medians(problem, k, restarts, seed), True, 0
    if method == "hkmeans":
        if cloud is None:
            raise UsageError("hkmeans needs --coords")
        return hk_means(cloud, k, restarts, seed), True, 0
    raise UsageError(f"unknown method {method}")


def cmd_solve(args) -> int:
    config = _solver_config(args)
    if args.method in ("hkmedians", "hkmeans") and not args.k:
        raise UsageError(f"{args.method} needs --k")
    if args.method == "hkmeans" and not args.coords:
        raise UsageError("hkmeans needs --coords")
    problem = hio.read_problem(args.problem)
    report = validate_problem(problem)
    if not report.valid:
        raise InputError("invalid problem: " + "; ".join(report.violations[:5]))
    cloud = _load_cloud(args.coords) if args.coords else None
    k = _ints(args.k) if args.k else None
    sol, converged, iters = run_method(args.method, problem, config, k, args.restarts, cloud, args.seed)
    value = objective(sol, problem)
    cfg = asdict(config)
    cfg.update({"k": k, "restarts": args.restarts})
    hio.write_solution(args.out, sol, method=args.method, objective=value, config=cfg,
                       trace={"converged": converged, "iterations": iters})
    print(f"method={args.method} objective={value:.6f} converged={converged} iterations={iters}")
    print("clusters per layer: " + " ".join(str(x) for x in sol.cluster_counts()))
    return EXIT_OK if converged else EXIT_NOCONV


# evaluation

def _print_table(header, rows):
    widths = [max(len(str(h)), *(len(_fmt(r[i])) for r in rows)) if rows else len(str(h))
              for i, h in enumerate(header)]
    print("  ".join(str(h).ljust(w) for h, w in zip(header, widths)))
    for r in rows:
        print("  ".join(_fmt(v).ljust(w) for v, w in zip(r, widths)))


def _fmt(v):
    if v is None:
        return "NA"
    if isinstance(v, float):
        return f"{v:.6g}"
    return str(v)


def _emit(args, header, rows):
    _print_table(header, rows)
    if args.out:
        hio.write_csv(args.out, header, rows)


def cmd_eval(args) -> int:
    sub = args.sub
    if sub == "brute":
        problem = hio.read_problem(args.problem)
        try:
            sol, value = brute_force_map(problem)
        except OracleTooLarge as exc:
            raise InputError(str(exc))
        if args.solution_out:
            hio.write_solution(args.solution_out, sol, method="brute", objective=value)
        header = ["layer", "exemplars", "objective"]
        rows = [(l + 1, " ".join(map(str, sol.exemplars(l))), value) for l in range(sol.num_layers)]
        _emit(args, header, rows)
        return EXIT_OK

    if sub == "compare" and args.sweep:
        return _compare_sweep(args)

    if not args.solutions:
        raise UsageError(f"eval {sub} needs at least one solution file")
    loaded = []
    for path in args.solutions:
        sol, doc = hio.read_solution(path)
        loaded.append((doc.get("method") or Path(path).stem, sol, doc, path))

    if sub in ("objective", "compare"):
        if not args.problem:
            raise UsageError(f"eval {sub} needs --problem")
        problem = hio.read_problem(args.problem)
        for _, sol, _, path in loaded:
            if sol.num_points != problem.num_points or sol.num_layers != problem.num_layers:
                raise InputError(f"{path} does not match the problem dimensions")
        if sub == "objective":
            rows = [(path, m, objective(sol, problem), doc.get("objective")) for m, sol, doc, path in loaded]
            _emit(args, ["solution", "method", "objective", "stored_objective"], rows)
        else:
            table = compare_objectives([(m, sol) for m, sol, _, _ in loaded], problem, args.baseline)
            _emit(args, ["method", "objective", "percent_improvement"], table)
        return EXIT_OK

    if not args.tree:
        raise UsageError(f"eval {sub} needs --tree")
    tree = hio.read_tree(args.tree)
    for _, sol, _, path in loaded:
        if sol.num_points != tree.num_nodes:
            raise InputError(f"{path} covers {sol.num_points} points, tree has {tree.num_nodes}")
    if sub == "rand":
        rows = []
        for m, sol, _, path in loaded:
            for l in range(1, sol.num_layers + 1):
                rows.append((path, m, l, rand_index(sol, tree, l)))
        _emit(args, ["solution", "method", "layer", "rand_index"], rows)
    else:
        rows = []
        for m, sol, _, path in loaded:
            pr = precision_recall(sol, tree, setting_id=path)
            rows.append((path, m, pr.precision, pr.recall, pr.tp, pr.fp, pr.fn))
        _emit(args, ["solution", "method", "precision", "recall", "tp", "fp", "fn"], rows)
    return EXIT_OK


def _compare_sweep(args) -> int:
    agg = Path(args.sweep) / "aggregate.csv"
    if not agg.exists():
        raise InputError(f"{agg} not found")
    by_key = {}
    for row in hio.read_csv(agg):
        key = (row["instance_seed"], row["setting_id"])
        by_key.setdefault(key, {"n": row["n"], "layers": row["layers"]})[row["method"]] = row["objective"]
    header = ["instance_seed", "setting_id", "n", "layers", "objective_hap", "objective_greedy", "percent_improvement"]
    rows = []
    for (seed, sid), d in sorted(by_key.items(), key=lambda kv: (int(kv[0][0] or 0), kv[0][1])):
        if "hap" not in d or "greedy" not in d or not d["hap"] or not d["greedy"]:
            continue
        oh, og = float(d["hap"]), float(d["greedy"])
        pct = percent_improvement(oh, og) if np.isfinite(oh) and np.isfinite(og) else None
        rows.append((seed, sid, int(d["n"]), int(d["layers"]), oh, og, pct))
    _emit(args, header, rows)
    return EXIT_OK


# sweeps

def preference_grid(grid: str | None, num_layers: int, rng=None, random_settings=0, value_range=None,
                    decreasing=False) -> list:
    """Per-layer preference settings.

    ``grid`` separates layers with ``;`` and values with ``,``; the settings
    are their cartesian product. A single group is reused for every layer.
    Otherwise ``random_settings`` draws of decreasing preferences from
    ``value_range`` are returned.
    """
    if grid:
        groups = [_floats(g) for g in grid.split(";")]
        if len(groups) == 1:
            groups = groups * num_layers
        if len(groups) != num_layers:
            raise UsageError(f"grid has {len(groups)} layer groups, problem has {num_layers} layers")
        settings = [np.array(c) for c in itertools.product(*groups)]
    else:
        lo, hi = value_range
        settings = [random_layer_preferences(rng, num_layers, lo, hi) for _ in range(random_settings)]
    if decreasing:
        settings = [c for c in settings if np.all(np.diff(c) <= 0)]
    return settings


def _sweep_task(task):
    (sid, seed, problem_doc, prefs, methods, cfg_dict, k, restarts, cloud, tree_doc,
     out_dir) = task
    base = hio.problem_from_doc(problem_doc)
    problem = LayeredProblem.build(base.similarity, np.asarray(prefs), metadata=base.metadata)
    tree = hio.tree_from_doc(tree_doc) if tree_doc else None
    config = SolverConfig(**cfg_dict)
    rows = []
    counts_from_hap = None
    for method in methods:
        t0 = time.perf_counter()
        row = {"setting_id": sid, "instance_seed": seed, "n": problem.num_points,
               "layers": problem.num_layers, "method": method,
               "preferences": " ".join(f"{x:.6g}" for x in np.ravel(prefs)[:problem.num_layers])}
        try:
            kk = k if k is not None else counts_from_hap
            sol, conv, iters = run_method(method, problem, config, kk, restarts,
                                          PointCloud(cloud) if cloud is not None else None, seed)
            value = objective(sol, problem)
            if method == "hap":
                counts_from_hap = sol.cluster_counts()
            hio.write_solution(Path(out_dir) / f"{sid}.{method}.json", sol, method=method,
                               objective=value, config=cfg_dict,
                               trace={"converged": conv, "iterations": iters})
            row.update(objective=value, cluster_counts=" ".join(map(str, sol.cluster_counts())),
                       converged=conv, iterations=iters)
            if tree is not None:
                layers = range(1, problem.num_layers + 1)
                row["rand_mean"] = float(np.mean([rand_index(sol, tree, l) for l in layers]))
                root = tree.to_solution(problem.num_layers).exemplars(problem.num_layers - 1)
                row["top_single"] = bool(np.array_equal(sol.exemplars(problem.num_layers - 1), root))
        except (UsageError, StructuralError, NumericalFailure, ValueError) as exc:
            row["error"] = f"{type(exc).__name__}: {exc}"
        row["wall_time"] = round(time.perf_counter() - t0, 4)
        rows.append(row)
    return rows


def cmd_sweep(args) -> int:
    methods = [m.strip() for m in args.methods.split(",") if m.strip()]
    bad = [m for m in methods if m not in METHODS]
    if bad:
        raise UsageError(f"unknown methods {bad}")
    if "hap" in methods:
        methods.remove("hap")
        methods.insert(0, "hap")
    if not args.problem and not args.gen:
        raise UsageError("sweep needs --problem or --gen")
    if not args.grid and not args.random_settings:
        raise UsageError("sweep needs --grid or --random-settings")
    config = _solver_config(args)
    k = _ints(args.k) if args.k else None
    if any(m in ("hkmedians", "hkmeans") for m in methods) and k is None and "hap" not in methods:
        raise UsageError("k-based methods need --k or hap in the method list")
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)

    instances = []
    if args.problem:
        problem = hio.read_problem(args.problem)
        tree = hio.read_tree(args.tree) if args.tree else None
        instances.append((args.seed, problem, tree))
    else:
        for seed in _seeds(args.seeds) if args.seeds else [args.seed]:
            tree = _generate(args.gen, args, seed)
            instances.append((seed, _problem_for(tree, 0.0, args), tree))

    tasks = []
    for seed, problem, tree in instances:
        rng = np.random.default_rng([seed, 2])
        rng_range = None
        if not args.grid:
            rng_range = _pref_range(args, tree.kind if tree is not None else "2d", problem)
        settings = preference_grid(args.grid, problem.num_layers, rng, args.random_settings,
                                   rng_range, args.decreasing)
        cloud = None
        if "hkmeans" in methods:
            if tree is not None:
                cloud = PointCloud.from_tree(tree).coords
            elif args.coords:
                cloud = _load_cloud(args.coords).coords
            else:
                raise UsageError("hkmeans needs --tree, --gen or --coords")
        pdoc = hio.problem_to_doc(problem)
        tdoc = hio.tree_to_doc(tree) if tree is not None else None
        for idx, prefs in enumerate(settings):
            sid = f"s{seed:04d}-{idx:04d}"
            tasks.append((sid, seed, pdoc, prefs, methods, asdict(config), k, args.restarts,
                          cloud, tdoc, str(out_dir)))

    jobs = args.jobs or int(os.environ.get("HAP_JOBS", "1"))
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            results = list(ex.map(_sweep_task, tasks))
    else:
        results = [_sweep_task(t) for t in tasks]
    rows = sorted((r for rs in results for r in rs),
                  key=lambda r: (r["setting_id"], methods.index(r["method"])))
    hio.write_csv(out_dir / "aggregate.csv", SWEEP_HEADER, [[r.get(h) for h in SWEEP_HEADER] for r in rows])
    failed = sum(1 for r in rows if r.get("error"))
    print(f"{len(tasks)} settings x {len(methods)} methods -> {out_dir / 'aggregate.csv'} ({failed} errors)")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="hap", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)
    sub.required = True

    g = sub.add_parser("gen", help="generate a synthetic problem and its ground-truth tree")
    g.add_argument("kind", choices=["2d", "seq"])
    _add_gen_flags(g)
    g.add_argument("--out", required=True, help="output prefix; writes PREFIX.problem.json and PREFIX.tree.json")
    g.set_defaults(func=cmd_gen)

    s = sub.add_parser("solve", help="solve a problem file with one method")
    s.add_argument("method", choices=METHODS)
    s.add_argument("problem")
    _add_solver_flags(s)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_solve)

    e = sub.add_parser("eval", help="evaluate solutions")
    e.add_argument("sub", choices=["objective", "rand", "pr", "brute", "compare"])
    e.add_argument("solutions", nargs="*")
    e.add_argument("--problem")
    e.add_argument("--tree")
    e.add_argument("--baseline", help="compare: method id used as the baseline")
    e.add_argument("--sweep", help="compare: sweep directory holding aggregate.csv")
    e.add_argument("--solution-out", help="brute: also write the optimal solution")
    e.add_argument("--out", help="CSV output path")
    e.set_defaults(func=cmd_eval)

    w = sub.add_parser("sweep", help="run methods over a preference grid")
    w.add_argument("--problem")
    w.add_argument("--tree", help="ground truth for Rand/top-ancestor columns and hkmeans coords")
    w.add_argument("--gen", choices=["2d", "seq"], help="generate instances instead of reading --problem")
    w.add_argument("--seeds", help="instance seeds for --gen, e.g. 0-19 or 1,5,7")
    _add_gen_flags(w)
    _add_solver_flags(w, seed=False)
    w.add_argument("--methods", default="hap,greedy")
    w.add_argument("--grid", help="per-layer values: 'a,b;c,d;...' (bottom first)")
    w.add_argument("--random-settings", type=int, default=0)
    w.add_argument("--decreasing", action="store_true", help="keep only settings decreasing with layer")
    w.add_argument("--jobs", type=int, default=0)
    w.add_argument("--out", required=True)
    w.set_defaults(func=cmd_sweep)
    return parser


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except UsageError as exc:
        print(f"hap: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"hap: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (InputError, hio.FormatError, StructuralError, OSError) as exc:
        print(f"hap: input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except NumericalFailure as exc:
        print(f"hap: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
