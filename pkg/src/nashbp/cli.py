"""Command-line experiments: ``nashbp generate|eval|compare|optimize``.

Every data file gets a ``<file>.manifest.json`` sidecar naming instance
hashes, seeds and parameters; the sidecar alone carries a timestamp.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import itertools
import json
import logging
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .bp import BPParams, DegenerateMessageError, run_fixed_t, run_mirror
from .enumerate import (DEFAULT_BUDGET, ResourceError, exact_observables, full_average,
                        sampled_average)
from .instance import GeneratorParams, dumps_instance, generate_instance, load_instance
from .observables import compute_exact, compute_from_marginals
from .optimize import Estimator, StopRule, exhaustive_x, greedy_decimation

log = logging.getLogger("nashbp")

OBS_HEADER = ["instance_id", "x_bitmask_or_hash", "source", "W", "N", "Osat", "F",
              "energy", "converged"]
COMPARE_HEADER = ["instance_id", "x_bitmask_or_hash", "S", "W_mirror", "W_oracle",
                  "W_oracle_se", "N_mirror", "N_oracle", "N_oracle_se", "mirror_converged",
                  "oracle_undefined", "oracle_unconverged"]
TRAJ_HEADER = ["step", "unit_off", "O_before", "O_after", "drop_abs", "drop_rel_cum"]

# Largest enumeration search space (product of per-user choice counts)
# accepted before the search is attempted at all.
MAX_SEARCH_SPACE = 10**12
MAX_FULL_SUM_USERS = 16

SCENARIO_DIR = Path(__file__).parent / "scenarios"
BUILTIN_SCENARIOS = ("S1", "S2", "S3")

GRID_KEYS = ("n_users", "n_units", "k", "capacity", "w_max", "omega", "alpha")


def fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".17g")
    return str(v)


@dataclass
class ScenarioSpec:
    """A parameter grid; each key of ``GRID_KEYS`` takes a list of values.

    ``replicates`` instances are drawn per grid point; alternatively
    ``instances`` gives a total count spread round-robin over the grid.
    """

    name: str
    grid: dict
    replicates: int | None = None
    instances: int | None = None
    seed: int = 0
    sample_sizes: list = field(default_factory=lambda: [10, 100, 1000])
    estimators: list = field(default_factory=lambda: ["mirror"])

    @classmethod
    def from_dict(cls, doc: dict) -> "ScenarioSpec":
        allowed = set(GRID_KEYS) | {"name", "replicates", "instances", "seed",
                                    "sample_sizes", "estimators"}
        extra = set(doc) - allowed
        if extra:
            raise ValueError(f"unknown scenario key {sorted(extra)[0]!r}")
        grid = {}
        for key in GRID_KEYS:
            if key not in doc:
                if key == "alpha":
                    grid[key] = [0.0]
                    continue
                raise ValueError(f"scenario missing key {key!r}")
            v = doc[key]
            grid[key] = list(v) if isinstance(v, list) else [v]
        spec = cls(name=doc.get("name", "scenario"), grid=grid,
                   replicates=doc.get("replicates"), instances=doc.get("instances"),
                   seed=int(doc.get("seed", 0)))
        if "sample_sizes" in doc:
            spec.sample_sizes = list(doc["sample_sizes"])
        if "estimators" in doc:
            spec.estimators = list(doc["estimators"])
        if (spec.replicates is None) == (spec.instances is None):
            raise ValueError("scenario needs exactly one of 'replicates' or 'instances'")
        return spec

    def points(self) -> list[dict]:
        return [dict(zip(GRID_KEYS, combo))
                for combo in itertools.product(*(self.grid[k] for k in GRID_KEYS))]

    def batch(self, seed: int | None = None) -> list[tuple[dict, int]]:
        """(grid point, replicate index) for every instance in the batch.

        With a total ``instances`` count the grid is visited in a seeded
        random order, so a batch smaller than the grid still spreads over it.
        """
        pts = self.points()
        if self.replicates is not None:
            return [(pt, r) for pt in pts for r in range(self.replicates)]
        order = np.random.default_rng(self.seed if seed is None else seed).permutation(len(pts))
        return [(pts[order[i % len(pts)]], i // len(pts)) for i in range(self.instances)]


def instance_seed(base: int, index: int) -> int:
    return int(np.random.SeedSequence([base, index]).generate_state(1, np.uint64)[0])


def file_hash(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def write_manifest(data_path: Path, payload: dict, args: argparse.Namespace) -> None:
    doc = dict(payload)
    doc["arguments"] = {k: v for k, v in sorted(vars(args).items()) if k != "func"}
    doc["version"] = __version__
    doc["data_file"] = data_path.name
    doc["data_sha256"] = file_hash(data_path)
    doc["created"] = time.strftime("%Y-%m-%dT%H:%M:%S%z")
    Path(str(data_path) + ".manifest.json").write_text(json.dumps(doc, indent=1, sort_keys=True) + "\n")


def write_csv(path: Path, header, rows) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(v) for v in row])


def bp_params_from(args) -> BPParams:
    return BPParams(damping=args.damping, tol=args.tol, max_iters=args.max_iters,
                    seed=args.seed, schedule=args.schedule)


def parse_x(spec: str, n_units: int) -> np.ndarray:
    if spec in ("all-on", "on"):
        return np.ones(n_units, dtype=np.int64)
    if spec in ("all-off", "off"):
        return np.zeros(n_units, dtype=np.int64)
    if len(spec) != n_units or set(spec) - {"0", "1"}:
        raise ValueError(f"x must be a {n_units}-character 0/1 string, 'all-on' or 'all-off'")
    return np.array([int(c) for c in spec], dtype=np.int64)


def x_label(x) -> str:
    return "".join(str(int(v)) for v in x)


def search_space(inst, t) -> float:
    deg = np.diff(inst.user_ptr)
    return float(np.prod((deg + 1.0)[np.asarray(t) == 1]))


# ------------------------------------------------------------------ commands

def load_scenario(name_or_path) -> ScenarioSpec:
    """Read a scenario file; bare names ``S1``..``S3`` resolve to the bundled ones."""
    path = Path(name_or_path)
    if not path.exists() and str(name_or_path) in BUILTIN_SCENARIOS:
        path = SCENARIO_DIR / f"{name_or_path}.json"
    return ScenarioSpec.from_dict(json.loads(path.read_text()))


def scenario_batch(spec: ScenarioSpec, base_seed: int | None = None):
    """Yield ``(index, grid_point, replicate, seed, Instance)`` for a scenario."""
    base = spec.seed if base_seed is None else base_seed
    for i, (pt, rep) in enumerate(spec.batch(base)):
        seed = instance_seed(base, i)
        gp = GeneratorParams(n_users=pt["n_users"], n_units=pt["n_units"], k=pt["k"],
                             c_uniform=pt["capacity"], w_max=pt["w_max"], omega=pt["omega"],
                             alpha=pt["alpha"], seed=seed)
        yield i, pt, rep, seed, generate_instance(gp)


def cmd_generate(args) -> int:
    spec = load_scenario(args.scenario)
    if args.count is not None:
        spec.instances, spec.replicates = args.count, None
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    base = spec.seed if args.seed is None else args.seed
    entries = []
    for i, pt, rep, seed, inst in scenario_batch(spec, base):
        name = f"{spec.name}_{i:05d}.json"
        (out / name).write_text(dumps_instance(inst))
        entries.append({"file": name, "grid_point": pt, "replicate": rep, "seed": seed,
                        "sha256": file_hash(out / name)})
    manifest = {"scenario": spec.name, "base_seed": base, "grid": spec.grid,
                "replicates": spec.replicates, "instances": spec.instances,
                "grid_order": "seeded permutation of the grid, cycled", "entries": entries}
    index = out / "index.json"
    index.write_text(json.dumps(manifest, indent=1, sort_keys=True) + "\n")
    write_manifest(index, {"command": "generate", "scenario_file": str(args.scenario)}, args)
    log.info("wrote %d instances to %s", len(entries), out)
    return 0


def evaluate(inst, x, estimator: str, args, t=None):
    """One ``ObservableSet`` for the chosen estimator."""
    params = bp_params_from(args)
    if estimator == "mirror":
        marg, rep = run_mirror(inst, x, params)
        return compute_from_marginals(inst, x, marg, "mirror-bp", rep.converged)
    if estimator == "fixed-t":
        if t is None:
            raise ValueError("fixed-t estimator requires --t")
        marg, rep = run_fixed_t(inst, x, t, params)
        return compute_from_marginals(inst, x, marg, "fixed-t-bp", rep.converged)
    if estimator == "exact":
        if t is not None:
            if search_space(inst, t) > MAX_SEARCH_SPACE:
                raise ResourceError(f"enumeration space exceeds {MAX_SEARCH_SPACE:.0e}")
            return compute_exact(inst, x, exact_observables(inst, x, t, args.budget), "exact")
        if inst.n_users > MAX_FULL_SUM_USERS:
            raise ResourceError(f"exact averaging needs n_users <= {MAX_FULL_SUM_USERS}, "
                                f"got {inst.n_users}")
        return compute_exact(inst, x, full_average(inst, x, budget=args.budget), "exact")
    if estimator == "sampled":
        if args.sample_size is None:
            raise ValueError("sampled estimator requires --sample-size")
        inner = args.inner
        if inner == "enumerate" and search_space(inst, np.ones(inst.n_users)) > MAX_SEARCH_SPACE:
            raise ResourceError(f"enumeration space exceeds {MAX_SEARCH_SPACE:.0e}; use --inner bp")
        res = sampled_average(inst, x, args.sample_size, args.seed, inner=inner,
                              bp_params=params, budget=args.budget)
        return compute_exact(inst, x, res, "sampled")
    raise ValueError(f"unknown estimator {estimator!r}")


def cmd_eval(args) -> int:
    inst = load_instance(args.instance)
    x = parse_x(args.x, inst.n_units)
    t = None if args.t is None else np.array([int(c) for c in args.t], dtype=np.int64)
    obs = evaluate(inst, x, args.estimator, args, t)
    out = Path(args.out)
    row = [Path(args.instance).stem, x_label(x), obs.source, obs.W, obs.N, obs.Osat, obs.F,
           obs.energy, obs.converged]
    write_csv(out, OBS_HEADER, [row])
    write_manifest(out, {"command": "eval", "instances": {Path(args.instance).stem: file_hash(args.instance)},
                         "estimator": args.estimator, "seed": args.seed,
                         "bp_params": asdict(bp_params_from(args)), "sample_size": args.sample_size},
                   args)
    return 0


def _compare_one(job):
    path, x_spec, sizes, oracle, params, seed, budget = job
    inst = load_instance(path)
    x = parse_x(x_spec, inst.n_units)
    try:
        marg, rep = run_mirror(inst, x, params)
        mobs = compute_from_marginals(inst, x, marg, "mirror-bp", rep.converged)
        Wm, Nm, conv = mobs.W, mobs.N, rep.converged
    except DegenerateMessageError:
        Wm = Nm = float("nan")
        conv = False
    rows = []
    for S in sizes:
        res = sampled_average(inst, x, S, seed, inner=oracle, bp_params=params, budget=budget)
        rows.append([Path(path).stem, x_label(x), S, Wm, res.W, res.W_se, Nm, res.N, res.N_se,
                     conv, res.n_undefined, res.n_unconverged])
    return rows


def cmd_compare(args) -> int:
    params = bp_params_from(args)
    jobs = [(p, args.x, args.sample_sizes, args.oracle, params, args.seed, args.budget)
            for p in args.instances]
    rows = []
    for chunk in _map(_compare_one, jobs, args.workers):
        rows.extend(chunk)
    out = Path(args.out)
    write_csv(out, COMPARE_HEADER, rows)
    write_manifest(out, {"command": "compare",
                         "instances": {Path(p).stem: file_hash(p) for p in args.instances},
                         "oracle": args.oracle, "sample_sizes": args.sample_sizes,
                         "seed": args.seed, "bp_params": asdict(params)}, args)
    return 0


def cmd_optimize(args) -> int:
    inst = load_instance(args.instance)
    est = Estimator(args.estimator, bp_params_from(args), args.sample_size or 1000, args.seed)
    out = Path(args.out)
    meta = {"command": "optimize", "method": args.method,
            "instances": {Path(args.instance).stem: file_hash(args.instance)},
            "estimator": asdict(est)}
    if args.method == "greedy":
        rule = StopRule(args.stop_rule, args.stop_value)
        traj = greedy_decimation(inst, est, rule, max_steps=args.max_steps,
                                 workers=args.workers)
        rows = [[i + 1, st.switched_off, st.O_before, st.O_after, st.drop_abs,
                 st.drop_rel_cumulative] for i, st in enumerate(traj.steps)]
        write_csv(out, TRAJ_HEADER, rows)
        meta.update(stop_rule=asdict(rule), chosen_stop=traj.chosen_stop,
                    x_chosen=x_label(traj.x_chosen), O_initial=traj.initial.Osat)
    else:
        res = exhaustive_x(inst, est, workers=args.workers)
        rows = []
        for xv, obs in res.table:
            if obs is None:
                rows.append([x_label(xv), "", "", "", "", fmt(float(np.dot(inst.cost, xv))), 0])
            else:
                rows.append([x_label(xv), obs.W, obs.N, obs.Osat, obs.F, obs.energy, 1])
        write_csv(out, ["x", "W", "N", "Osat", "F", "energy", "ok"], rows)
        best = out.with_suffix(".best.json")
        best.write_text(json.dumps({"x": x_label(res.x_best), "F": fmt(res.F_best)}, indent=1) + "\n")
        meta.update(x_best=x_label(res.x_best))
    write_manifest(out, meta, args)
    return 0


def _map(fn, jobs, workers):
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(workers) as pool:
            yield from pool.map(fn, jobs)
    else:
        for j in jobs:
            yield fn(j)


# --------------------------------------------------------------------- parser

def _common(p: argparse.ArgumentParser, seed_default=0):
    p.add_argument("--seed", type=int, default=seed_default)
    p.add_argument("--out", required=True)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--damping", type=float, default=0.5)
    p.add_argument("--tol", type=float, default=1e-8)
    p.add_argument("--max-iters", type=int, default=10_000)
    p.add_argument("--schedule", choices=("sequential", "random"), default="sequential")
    p.add_argument("--sample-size", type=int, default=None)
    p.add_argument("--budget", type=int, default=DEFAULT_BUDGET,
                   help="node budget for equilibrium enumeration")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="nashbp", description=__doc__.splitlines()[0])
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="generate an instance batch from a scenario file")
    p.add_argument("scenario", help="scenario JSON path or a bundled name (S1, S2, S3)")
    p.add_argument("--count", type=int, default=None,
                   help="override the scenario's total instance count")
    _common(p, seed_default=None)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("eval", help="evaluate one activation vector")
    p.add_argument("instance")
    p.add_argument("--x", default="all-on")
    p.add_argument("--estimator", choices=("mirror", "fixed-t", "exact", "sampled"),
                   default="mirror")
    p.add_argument("--t", default=None, help="presence pattern as a 0/1 string")
    p.add_argument("--inner", choices=("enumerate", "bp"), default="enumerate")
    _common(p)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("compare", help="mirror BP against a sampling oracle")
    p.add_argument("instances", nargs="+")
    p.add_argument("--x", default="all-on")
    p.add_argument("--sample-sizes", type=int, nargs="+", default=[10, 100, 1000])
    p.add_argument("--oracle", choices=("enumerate", "bp"), default="enumerate",
                   help="per-pattern evaluator: exhaustive enumeration or fixed-t BP")
    _common(p)
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("optimize", help="search activation vectors")
    p.add_argument("instance")
    p.add_argument("--method", choices=("greedy", "exhaustive"), required=True)
    p.add_argument("--estimator", choices=("mirror", "sampled", "exact"), default="mirror")
    p.add_argument("--stop-rule", choices=("rel_drop", "max_steps", "none"), default="rel_drop")
    p.add_argument("--stop-value", type=float, default=0.005)
    p.add_argument("--max-steps", type=int, default=None)
    _common(p)
    p.set_defaults(func=cmd_optimize)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (ResourceError, ValueError, OSError) as exc:
        print(f"nashbp {args.command}: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
