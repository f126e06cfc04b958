"""Command-line entry point: ``maskgame solve | experiment | case-study | fixtures``.

Exit codes: 0 success, 2 usage error, 3 invalid game spec, 4 solver failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from maskgame import fixtures
from maskgame.baselines import RandomMaskSampler, greedy_mask
from maskgame.errors import CapacityError, ConfigurationError, SchemaError, SolverError, TrainingError
from maskgame.evaluate import FixedMaskSampler, evaluate_samples, mask_support, write_csv
from maskgame.exact import solve_lp_cg
from maskgame.gam import TrainConfig, train_gam, train_unconditional
from maskgame.game import GameSpec, load_game
from maskgame.generator import generate_structured_instance, random_indicator_game

log = logging.getLogger("maskgame")

METHODS = ("lp-cg", "gam", "unconditional", "greedy", "random")
AXES = {"n": int, "num_exploits": int, "c": float, "m": int}
EXIT_OK, EXIT_USAGE, EXIT_SPEC, EXIT_SOLVER = 0, 2, 3, 4
STRUCTURED_MIN_N = 12


class UsageError(Exception):
    pass


@dataclasses.dataclass
class GameSource:
    """Where a game comes from: a spec file, a bundled fixture, or generator parameters."""

    spec: str | None = None
    fixture: str | None = None
    n: int | None = None
    m: int = 1
    num_exploits: int | None = None
    V: int = 3
    c: float = 0.01
    generator: str = "auto"
    instance_seed: int | None = None

    def build(self, seed: int = 0) -> GameSpec:
        if self.spec is not None:
            return load_game(self.spec)
        if self.fixture is not None:
            return fixtures.load_fixture(self.fixture)
        n = self.n
        E = self.num_exploits if self.num_exploits is not None else n
        inst = self.instance_seed if self.instance_seed is not None else seed
        kind = self.generator
        if kind == "auto":
            kind = "structured" if n >= STRUCTURED_MIN_N else "binary"
        if kind == "structured":
            return generate_structured_instance(n, self.m, E, self.V, inst, c=self.c)
        return random_indicator_game(n, self.m, E, inst, c=self.c)

    def with_axis(self, axis: str, value) -> "GameSource":
        return dataclasses.replace(self, **{axis: value})

    def apply_overrides(self, game: GameSpec, axis: str | None, value) -> GameSpec:
        # spec files and fixtures can still be swept over c and m
        if self.n is not None or axis is None:
            return game
        if axis == "c":
            return game.with_cost(value)
        if axis == "m":
            return dataclasses.replace(game, m=value)
        raise UsageError(f"--axis {axis} needs generator parameters, not a spec file")


@dataclasses.dataclass
class RunManifest:
    command: str
    source: GameSource
    methods: tuple[str, ...]
    seeds: tuple[int, ...]
    out: Path
    eps: float = 1e-5
    batch: int | None = None
    iters: int | None = None
    eval_samples: int = 100_000
    cost_ramp: float | None = None
    select_every: int | None = None
    axis: str | None = None
    values: tuple = ()
    workers: int = 1

    def validate(self) -> None:
        for method in self.methods:
            if method not in METHODS:
                raise UsageError(f"unknown method {method!r}; choose from {', '.join(METHODS)}")
        if not self.seeds:
            raise UsageError("need at least one seed")
        if self.eps <= 0:
            raise UsageError("--eps must be positive")
        if self.eval_samples < 1:
            raise UsageError("--eval-samples must be positive")
        for name in ("batch", "iters"):
            value = getattr(self, name)
            if value is not None and value < 1:
                raise UsageError(f"--{name} must be positive")
        if self.cost_ramp is not None and not 0.0 <= self.cost_ramp <= 1.0:
            raise UsageError("--cost-ramp must lie in [0, 1]")
        if self.select_every is not None and self.select_every < 0:
            raise UsageError("--select-every must be >= 0")
        src = self.source
        given = sum(x is not None for x in (src.spec, src.fixture, src.n))
        if given != 1:
            raise UsageError("give exactly one of --spec, --fixture, --n")
        if src.fixture is not None and src.fixture not in fixtures.NAMES:
            raise UsageError(f"unknown fixture {src.fixture!r}; choose from {', '.join(fixtures.NAMES)}")
        if src.n is not None and src.n < 1:
            raise UsageError("--n must be >= 1")
        if src.generator == "structured" and src.n is not None and src.n < STRUCTURED_MIN_N:
            raise UsageError(f"structured instances need --n >= {STRUCTURED_MIN_N}")
        if self.command == "experiment":
            if self.axis not in AXES:
                raise UsageError(f"--axis must be one of {', '.join(AXES)}")
            if not self.values:
                raise UsageError("--values must list at least one value")
        if self.workers < 1:
            raise UsageError("--workers must be >= 1")

    def train_config(self, seed: int) -> TrainConfig:
        kw = {"seed": seed}
        if self.batch is not None:
            kw["batch"] = self.batch
        for name in ("iters", "cost_ramp", "select_every"):
            if getattr(self, name) is not None:
                kw[name] = getattr(self, name)
        return TrainConfig(**kw)


# -- running one method ------------------------------------------------------


def run_method(game: GameSpec, method: str, seed: int, manifest: RunManifest, out: Path | None):
    """Run ``method`` once; returns (CSV row, summary dict). Artifacts go to ``out``."""
    start = time.perf_counter()
    if method == "lp-cg":
        res = solve_lp_cg(game, eps=manifest.eps, seed=seed)
        runtime = time.perf_counter() - start
        cost = res.defender_loss - res.attacker_value
        if out is not None:
            res.to_json(out / f"strategy-{seed}.json")
        row = _row(game, method, seed, res.defender_loss, res.attacker_value, cost, runtime)
        return row, {"defender_loss": res.defender_loss, "rounds": res.iterations, "gap": res.gap}

    extra = {}
    if method in ("gam", "unconditional"):
        train = train_gam if method == "gam" else train_unconditional
        res = train(game, manifest.train_config(seed))
        sampler = res.sampler()
        if out is not None:
            res.save(out / f"netparams-{seed}.bin")
        extra["train_loss"] = res.final_loss
    elif method == "greedy":
        budget = manifest.batch if manifest.batch is not None else 10_000
        mask, _, state = greedy_mask(game, eval_budget=budget, seed=seed)
        sampler = FixedMaskSampler(mask)
        extra["masked"] = state.masked
    else:
        sampler = RandomMaskSampler()
    rng = np.random.default_rng(seed)
    X, Y = sampler(game, rng, manifest.eval_samples)
    runtime = time.perf_counter() - start
    report = evaluate_samples(X, Y, game, seed)
    if out is not None:
        masks, probs = mask_support(X, Y)
        doc = {
            "method": method,
            "seed": seed,
            "defender_loss": report.defender_loss,
            "attack_value": report.attack_value,
            "cost_term": report.cost_term,
            "exploit_freq": report.exploit_freq.tolist(),
            "attribute_mask_prob": (1.0 - Y.mean(axis=0)).tolist(),
            "mask_support": {"matrix": masks.T.tolist(), "probs": probs.tolist()},
            **extra,
        }
        (out / f"strategy-{seed}.json").write_text(json.dumps(doc, indent=1))
    row = report.row(method, game, runtime)
    return row, {"defender_loss": report.defender_loss, **extra}


def _row(game, method, seed, loss, attack, cost, runtime, status="ok"):
    costs = set(game.cost.per_attribute)
    return {
        "seed": seed, "method": method, "n": game.n, "m": game.m,
        "num_exploits": game.num_exploits, "c": costs.pop() if len(costs) == 1 else "mixed",
        "V": game.schema.V, "defender_loss": loss, "attack_value": attack,
        "cost_term": cost, "runtime_seconds": runtime, "status": status,
    }


# -- commands ------------------------------------------------------------------


def cmd_solve(manifest: RunManifest) -> int:
    manifest.out.mkdir(parents=True, exist_ok=True)
    rows = []
    method = manifest.methods[0]
    for seed in manifest.seeds:
        game = manifest.source.build(seed)
        row, summary = run_method(game, method, seed, manifest, manifest.out)
        rows.append(row)
        print(f"seed {seed}: {method} defender loss {summary['defender_loss']:.4f}")
    write_csv(manifest.out / "results.csv", rows)
    losses = [r["defender_loss"] for r in rows]
    print(f"{method}: mean defender loss {np.mean(losses):.4f} (std {np.std(losses):.4f}, {len(rows)} seeds)")
    return EXIT_OK


def _cell(args):
    manifest, axis_value, method, seed = args
    src = manifest.source
    if src.n is not None:
        src = src.with_axis(manifest.axis, axis_value)
    try:
        game = src.apply_overrides(src.build(seed), manifest.axis, axis_value)
        row, _ = run_method(game, method, seed, manifest, None)
    except (SolverError, CapacityError, TrainingError, ConfigurationError, SchemaError, FloatingPointError) as exc:
        log.warning("cell %s=%s method=%s seed=%d failed: %s", manifest.axis, axis_value, method, seed, exc)
        row = {"seed": seed, "method": method, "n": src.n or 0, "m": src.m,
               "num_exploits": src.num_exploits or 0, "c": src.c, "V": src.V,
               "defender_loss": "", "attack_value": "", "cost_term": "", "runtime_seconds": "",
               "status": f"error: {type(exc).__name__}: {exc}"}
        if manifest.axis is not None:
            row[manifest.axis] = axis_value
    return row


def cmd_experiment(manifest: RunManifest) -> int:
    manifest.out.mkdir(parents=True, exist_ok=True)
    cells = [(manifest, v, meth, s) for v in manifest.values for meth in manifest.methods for s in manifest.seeds]
    if manifest.workers > 1:
        with ProcessPoolExecutor(max_workers=manifest.workers) as pool:
            rows = list(pool.map(_cell, cells))
    else:
        rows = [_cell(c) for c in cells]
    write_csv(manifest.out / "results.csv", rows)
    failed = sum(r["status"] != "ok" for r in rows)
    for v in manifest.values:
        for meth in manifest.methods:
            vals = [r["defender_loss"] for r in rows
                    if r["method"] == meth and r[manifest.axis] == v and r["status"] == "ok"]
            mean = f"{np.mean(vals):.4f}" if vals else "n/a"
            print(f"{manifest.axis}={v} {meth}: mean defender loss {mean} over {len(vals)} seeds")
    print(f"{len(rows)} rows written, {failed} failed")
    return EXIT_OK


def case_study_summary(game: GameSpec, X, Y, report) -> dict:
    """Exploit selection frequencies (most frequent first) plus per-attribute masking rates."""
    freq = report.exploit_freq
    order = np.argsort(-freq, kind="stable")
    masks, probs = mask_support(X, Y)
    return {
        "defender_loss": report.defender_loss,
        "exploit_freq": [{"exploit": int(e) + 1, "freq": float(freq[e])} for e in order],
        "top_exploit": int(order[0]) + 1,
        "attribute_mask_prob": (1.0 - Y.mean(axis=0)).tolist(),
        "mask_support": {"matrix": masks.T.tolist(), "probs": probs.tolist()},
    }


def cmd_case_study(manifest: RunManifest) -> int:
    out = manifest.out
    out.mkdir(parents=True, exist_ok=True)
    game = manifest.source.build(0)
    rows, freqs = [], []
    for seed in manifest.seeds:
        start = time.perf_counter()
        res = train_gam(game, manifest.train_config(seed))
        rng = np.random.default_rng(seed)
        X, Y = res.sampler()(game, rng, manifest.eval_samples)
        report = evaluate_samples(X, Y, game, seed)
        runtime = time.perf_counter() - start
        res.save(out / f"netparams-{seed}.bin")
        doc = {"method": "gam", "seed": seed, **case_study_summary(game, X, Y, report)}
        (out / f"strategy-{seed}.json").write_text(json.dumps(doc, indent=1))
        rows.append(report.row("gam", game, runtime))
        freqs.append(report.exploit_freq)
        masked = doc["attribute_mask_prob"]
        print(f"seed {seed}: loss {report.defender_loss:.4f}, top exploit {doc['top_exploit']}, "
              f"OS flags masked {min(masked[:3]):.2f}+")
    write_csv(out / "results.csv", rows)
    mean = np.mean(freqs, axis=0)
    print("exploit  mean frequency")
    for e in np.argsort(-mean, kind="stable"):
        print(f"{e + 1:7d}  {mean[e]:.4f}")
    return EXIT_OK


def cmd_fixtures(_manifest) -> int:
    for name in fixtures.NAMES:
        g = fixtures.load_fixture(name)
        print(f"{name}: n={g.n} m={g.m} exploits={g.num_exploits}")
    return EXIT_OK


# -- argument parsing ----------------------------------------------------------


def _parse_list(text: str, kind, flag: str):
    try:
        return tuple(kind(t) for t in text.split(",") if t.strip())
    except ValueError:
        raise UsageError(f"{flag}: cannot parse {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="maskgame", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, method_default=None, source=True):
        if source:
            g = sp.add_mutually_exclusive_group()
            g.add_argument("--spec", help="game-spec JSON file")
            g.add_argument("--fixture", help=f"bundled game ({', '.join(fixtures.NAMES)})")
            g.add_argument("--n", type=int, help="generate an instance with n attributes per device")
            sp.add_argument("--m", type=int, default=1, help="devices (generated instances)")
            sp.add_argument("--num-exploits", type=int, help="exploits (generated; default n)")
            sp.add_argument("--V", type=int, default=3, help="versions per OS/app (structured)")
            sp.add_argument("--c", type=float, default=0.01, help="per-attribute masking cost")
            sp.add_argument("--generator", choices=("auto", "structured", "binary"), default="auto",
                            help="instance family; auto picks structured for n >= 12")
            sp.add_argument("--instance-seed", type=int,
                            help="fixed instance seed (default: the run seed)")
        s = sp.add_mutually_exclusive_group()
        s.add_argument("--seeds", type=int, default=None, help="run seeds 0..K-1")
        s.add_argument("--seed-list", help="comma-separated seeds")
        sp.add_argument("--out", default="out", help="output directory")
        sp.add_argument("--eps", type=float, default=1e-5, help="lp-cg convergence tolerance")
        sp.add_argument("--batch", type=int, help="training sample size")
        sp.add_argument("--iters", type=int, help="training iterations")
        sp.add_argument("--eval-samples", type=int, default=100_000, help="evaluation draws M")
        sp.add_argument("--cost-ramp", type=float, help="fraction of iterations over which the cost weight ramps up")
        sp.add_argument("--select-every", type=int, help="checkpoint scoring period (0 keeps the last iterate)")

    sp = sub.add_parser("solve", help="run one method on one game")
    common(sp)
    sp.add_argument("--method", choices=METHODS, required=True)

    sp = sub.add_parser("experiment", help="sweep one parameter across methods and seeds")
    common(sp)
    sp.add_argument("--methods", default="gam,unconditional,greedy,random",
                    help="comma-separated methods")
    sp.add_argument("--method", dest="methods", help=argparse.SUPPRESS)
    sp.add_argument("--axis", choices=tuple(AXES), required=True)
    sp.add_argument("--values", required=True, help="comma-separated axis values")
    sp.add_argument("--workers", type=int, default=1, help="parallel worker processes")

    sp = sub.add_parser("case-study", help="train GAM on the bundled case-study game")
    common(sp, source=False)

    sub.add_parser("fixtures", help="list bundled games")
    return p


def manifest_from_args(args) -> RunManifest:
    if args.command == "fixtures":
        return RunManifest("fixtures", GameSource(fixture="case-study"), (), (0,), Path("."))
    if args.seed_list is not None:
        seeds = _parse_list(args.seed_list, int, "--seed-list")
    else:
        default = 5 if args.command == "case-study" else 1
        seeds = tuple(range(args.seeds if args.seeds is not None else default))
    if args.command == "case-study":
        source = GameSource(fixture="case-study")
    else:
        source = GameSource(spec=args.spec, fixture=args.fixture, n=args.n, m=args.m,
                            num_exploits=args.num_exploits, V=args.V, c=args.c,
                            generator=args.generator, instance_seed=args.instance_seed)
        if args.n is not None and args.instance_seed is None and args.command == "solve":
            source.instance_seed = 0
    manifest = RunManifest(command=args.command, source=source, methods=("gam",), seeds=seeds,
                           out=Path(args.out), eps=args.eps, batch=args.batch, iters=args.iters,
                           eval_samples=args.eval_samples, cost_ramp=args.cost_ramp,
                           select_every=args.select_every)
    if args.command == "solve":
        manifest.methods = (args.method,)
    elif args.command == "experiment":
        manifest.methods = _parse_list(args.methods, str, "--methods")
        manifest.axis = args.axis
        manifest.values = _parse_list(args.values, AXES[args.axis], "--values")
        manifest.workers = args.workers
        if args.axis in ("n", "num_exploits") and args.n is None:
            raise UsageError(f"--axis {args.axis} needs generator parameters (--n)")
    return manifest


COMMANDS = {"solve": cmd_solve, "experiment": cmd_experiment, "case-study": cmd_case_study,
            "fixtures": cmd_fixtures}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        manifest = manifest_from_args(args)
        manifest.validate()
        return COMMANDS[args.command](manifest)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"maskgame: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (SchemaError, FileNotFoundError, json.JSONDecodeError) as exc:
        print(f"maskgame: invalid game spec: {exc}", file=sys.stderr)
        return EXIT_SPEC
    except (SolverError, CapacityError, TrainingError, ConfigurationError, FloatingPointError) as exc:
        print(f"maskgame: solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
