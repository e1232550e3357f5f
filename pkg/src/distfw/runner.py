"""Experiment configuration and CLI.

Configs are flat ``key=value`` text (one per line, ``#`` comments); every
key is also available as a command-line flag, and flags override file
values.  Exit codes: 0 success, 1 config error, 2 runtime or invariant
breach, 3 I/O failure.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import dataclass, fields
from pathlib import Path

import numpy as np

from . import graph, metrics, problem as prob, sampling, solvers
from .constraint import L1Ball, lmo_l1

SOLVERS = ("dstofw", "denfw", "cenfw", "all")


class ConfigError(ValueError):
    """Invalid or missing configuration."""


@dataclass(frozen=True)
class RunConfig:
    solver: str
    dataset: str
    objective: str
    iters: int
    m: int = 10
    topology: str = "ring"
    set: str = "l1"
    radius: float = 20.0
    alpha: float = 0.5
    q: int | None = None
    partition_seed: int = 0
    sampling_seed: int = 0
    topology_seed: int = 0
    log_every: int = 1
    out: str = "run.csv"
    equalize: bool = True
    normalize: bool = False
    partition_strategy: str = "round_robin"
    start: str = "zero"
    feature_dim: int | None = None
    label_map: str = ""
    synthetic_n: int = 1024
    synthetic_dim: int = 20
    synthetic_seed: int = 0
    synthetic_noise: float = 0.05
    check_invariants: bool = False


_REQUIRED = ("solver", "dataset", "objective", "iters")

_BOOL_WORDS = {"true": True, "1": True, "yes": True, "on": True,
               "false": False, "0": False, "no": False, "off": False}


def _coerce(key: str, text: str, target):
    try:
        if target is bool:
            word = text.strip().lower()
            if word not in _BOOL_WORDS:
                raise ValueError
            return _BOOL_WORDS[word]
        if target is int:
            return int(text)
        if target is float:
            return float(text)
        return text
    except ValueError:
        raise ConfigError(f"key '{key}': cannot read {text!r} as {target.__name__}") from None


def _field_types() -> dict[str, type]:
    named = {"str": str, "int": int, "float": float, "bool": bool}
    table = {"q": int, "feature_dim": int}  # optional ints, annotated "int | None"
    for fld in fields(RunConfig):
        table.setdefault(fld.name, named[str(fld.type).split(" ")[0]])
    return table


_FIELD_TYPES = _field_types()


def parse_config_text(text: str) -> dict[str, str]:
    """Raw key=value pairs from flat config text; unknown keys rejected."""
    raw: dict[str, str] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise ConfigError(f"config line {lineno}: expected key=value, got {line!r}")
        key = key.strip()
        if key not in _FIELD_TYPES:
            raise ConfigError(f"config line {lineno}: unknown key '{key}'")
        raw[key] = value.strip()
    return raw


def build_config(raw: dict[str, str]) -> RunConfig:
    """Coerce, fill defaults, and validate a raw key->string mapping."""
    for key in raw:
        if key not in _FIELD_TYPES:
            raise ConfigError(f"unknown key '{key}'")
    for key in _REQUIRED:
        if key not in raw:
            raise ConfigError(f"missing required key '{key}'")
    values = {key: _coerce(key, text, _FIELD_TYPES[key]) for key, text in raw.items()}
    cfg = RunConfig(**values)
    _validate(cfg)
    return cfg


def _validate(cfg: RunConfig) -> None:
    def bad(key, why):
        raise ConfigError(f"key '{key}': {why}")

    if cfg.solver not in SOLVERS:
        bad("solver", f"must be one of {SOLVERS}")
    if cfg.objective not in prob.OBJECTIVES:
        bad("objective", f"must be one of {prob.OBJECTIVES}")
    if cfg.iters < 0:
        bad("iters", "must be >= 0")
    if cfg.m < 1:
        bad("m", "must be >= 1")
    if cfg.set != "l1":
        bad("set", "the l1 ball is the only supported constraint set")
    if cfg.radius <= 0:
        bad("radius", "must be positive")
    if not 0.0 < cfg.alpha <= 1.0:
        bad("alpha", "must lie in (0,1]")
    if cfg.q is not None and cfg.q < 2:
        bad("q", "epoch length must be >= 2")
    if cfg.log_every < 1:
        bad("log_every", "must be >= 1")
    if cfg.partition_strategy not in ("round_robin", "contiguous"):
        bad("partition_strategy", "must be round_robin or contiguous")
    if cfg.start not in ("zero", "random"):
        bad("start", "must be zero or random")
    if not 0.0 <= cfg.synthetic_noise < 1.0:
        bad("synthetic_noise", "must lie in [0,1)")
    if cfg.synthetic_n < 1 or cfg.synthetic_dim < 1:
        bad("synthetic_n", "synthetic size and dim must be >= 1")
    if cfg.dataset != "synthetic" and not Path(cfg.dataset).is_file():
        bad("dataset", f"file not found: {cfg.dataset}")
    kind, _, arg = cfg.topology.partition(":")
    if kind not in ("ring", "path", "complete", "ring_chords", "erdos_renyi", "custom"):
        bad("topology", f"unknown kind {kind!r}")
    if kind == "erdos_renyi":
        try:
            p = float(arg)
        except ValueError:
            p = -1.0
        if not 0.0 < p <= 1.0:
            bad("topology", f"erdos_renyi needs a probability in (0,1], got {arg!r}")
    if kind == "custom" and not Path(arg).is_file():
        bad("topology", f"edge-list file not found: {arg}")
    if cfg.label_map:
        _parse_label_map(cfg.label_map)


def _parse_label_map(text: str) -> dict[float, float]:
    mapping = {}
    for pair in text.split(","):
        raw_s, sep, mapped_s = pair.partition(":")
        try:
            if not sep:
                raise ValueError
            raw, mapped = float(raw_s), float(mapped_s)
            if mapped not in (-1.0, 1.0):
                raise ValueError
        except ValueError:
            raise ConfigError(
                f"key 'label_map': bad entry {pair!r}, expected raw:+-1 pairs") from None
        mapping[raw] = mapped
    return mapping


# ---------------------------------------------------------------------------
# Experiment wiring
# ---------------------------------------------------------------------------

def _build_topology(cfg: RunConfig) -> graph.Topology:
    kind, _, arg = cfg.topology.partition(":")
    if kind == "erdos_renyi":
        try:
            p = float(arg)
        except ValueError:
            raise ConfigError(f"key 'topology': erdos_renyi needs a probability, got {arg!r}") from None
        return graph.build_topology("erdos_renyi", cfg.m, seed=cfg.topology_seed, p=p)
    if kind == "custom":
        return graph.load_edge_list(arg, cfg.m)
    return graph.build_topology(kind, cfg.m, seed=cfg.topology_seed)


def _load_samples(cfg: RunConfig) -> tuple[list[prob.Sample], int]:
    if cfg.dataset == "synthetic":
        samples = prob.synthetic_samples(cfg.synthetic_n, cfg.synthetic_dim,
                                         seed=cfg.synthetic_seed, noise=cfg.synthetic_noise)
        dim = cfg.synthetic_dim
    else:
        label_map = _parse_label_map(cfg.label_map) if cfg.label_map else None
        with open(cfg.dataset) as fh:
            samples, dim = prob.parse_libsvm(fh, dim=cfg.feature_dim, label_map=label_map)
    if cfg.normalize:
        samples = prob.scale_max_abs(samples)
    return samples, dim


def _start_vector(cfg: RunConfig, dim: int) -> np.ndarray:
    if cfg.start == "zero":
        return np.zeros(dim)
    rng = np.random.default_rng(np.random.SeedSequence((cfg.sampling_seed, 0x57A57)))
    direction = rng.standard_normal(dim)
    return direction * (cfg.radius * rng.random() / np.sum(np.abs(direction)))


def _out_path(cfg: RunConfig, solver: str) -> Path:
    path = Path(cfg.out)
    if cfg.solver != "all":
        return path
    return path.with_name(f"{path.stem}_{solver}{path.suffix or '.csv'}")


def _config_meta(cfg: RunConfig, solver: str) -> dict[str, object]:
    meta: dict[str, object] = {}
    for f in fields(cfg):
        value = getattr(cfg, f.name)
        meta[f.name] = "" if value is None else value
    meta["solver"] = solver
    return meta


def run_experiment(cfg: RunConfig) -> list[Path]:
    """Build topology -> weights -> problem -> schedules -> solver -> CSV."""
    topo = _build_topology(cfg)
    wmat = graph.metropolis_weights(topo)
    samples, dim = _load_samples(cfg)
    locals_m = prob.partition(samples, cfg.m, strategy=cfg.partition_strategy,
                              seed=cfg.partition_seed, equalize=cfg.equalize, dim=dim)
    constraint = L1Ball(cfg.radius, dim)
    x0 = _start_vector(cfg, dim)
    solver_list = [cfg.solver] if cfg.solver != "all" else ["dstofw", "denfw", "cenfw"]
    outputs = []
    for solver in solver_list:
        if solver == "cenfw":
            merged = [s for loc in locals_m for s in loc.samples]
            problem = prob.FiniteSumProblem(
                locals=(prob.LocalDataset(merged, dim),), objective=cfg.objective, dim=dim)
        else:
            problem = prob.FiniteSumProblem(locals=tuple(locals_m),
                                            objective=cfg.objective, dim=dim)
        n_local = min(loc.n for loc in problem.locals)
        q_eff = cfg.q if cfg.q is not None else sampling.epoch_length(n_local, cfg.objective)
        sched = solvers.make_step_schedule(solver, cfg.objective, alpha=cfg.alpha,
                                           q=q_eff, total_iters=cfg.iters)
        schedule = sampling.SamplingSchedule(q_eff, sched.gamma, n_local)
        meta = _config_meta(cfg, solver)
        meta.update({
            "dim": dim, "n_local": n_local, "q_effective": q_eff,
            "lambda2": wmat.lambda2,
            "k0": graph.k0_alpha(wmat.lambda2, 1.0 if cfg.objective == "convex" else cfg.alpha),
            "sampling_scheme": "rule1_spider",
        })
        common = dict(log_every=cfg.log_every, x0=x0,
                      check_invariants=cfg.check_invariants, meta=meta)
        if solver == "dstofw":
            log = solvers.run_dstofw(problem, constraint, wmat, sched, schedule,
                                     cfg.iters, sampling_seed=cfg.sampling_seed, **common)
        elif solver == "denfw":
            log = solvers.run_denfw(problem, constraint, wmat, sched, cfg.iters, **common)
        else:
            log = solvers.run_cenfw(problem, constraint, sched, schedule, cfg.iters,
                                    sampling_seed=cfg.sampling_seed, **common)
        footers = {
            "min_fw_gap_second_half": metrics.min_fw_gap_second_half(log, cfg.iters),
            "final_loss": log.records[-1].loss,
        }
        out = _out_path(cfg, solver)
        metrics.emit_csv(log, out, footers)
        outputs.append(out)
    return outputs


# ---------------------------------------------------------------------------
# CLI
# ---------------------------------------------------------------------------

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


def _make_parser() -> _Parser:
    parser = _Parser(prog="distfw",
                     description="Distributed stochastic Frank-Wolfe simulation engine")
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="run one experiment (or all three solvers)")
    run_p.add_argument("--config", help="flat key=value config file")
    run_p.add_argument("--seed", type=int,
                       help="convenience: sets partition, sampling and topology seeds")
    run_p.add_argument("--check-invariants", action="store_true", default=None)
    for f in fields(RunConfig):
        if f.name == "check_invariants":
            continue
        run_p.add_argument(f"--{f.name.replace('_', '-')}", dest=f.name, metavar="V")

    lmo_p = sub.add_parser("lmo-test", help="brute-force check of the l1-ball LMO")
    lmo_p.add_argument("--trials", type=int, default=1000)
    lmo_p.add_argument("--max-dim", type=int, default=10)
    lmo_p.add_argument("--radius", type=float, default=20.0)
    lmo_p.add_argument("--seed", type=int, default=0)

    spec_p = sub.add_parser("spectrum", help="mixing-matrix spectral-gap report")
    spec_p.add_argument("--topology", required=True)
    spec_p.add_argument("--m", type=int, required=True)
    spec_p.add_argument("--topology-seed", type=int, default=0)
    spec_p.add_argument("--alpha", type=float, default=1.0)
    return parser


def _cmd_run(args) -> int:
    raw: dict[str, str] = {}
    if args.config:
        try:
            text = Path(args.config).read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config file: {exc}") from None
        raw.update(parse_config_text(text))
    if args.seed is not None:
        for key in ("partition_seed", "sampling_seed", "topology_seed"):
            raw[key] = str(args.seed)
    for f in fields(RunConfig):
        if f.name == "check_invariants":
            continue
        value = getattr(args, f.name, None)
        if value is not None:
            raw[f.name] = value
    if args.check_invariants:
        raw["check_invariants"] = "true"
    cfg = build_config(raw)
    for path in run_experiment(cfg):
        print(f"wrote {path}")
    return 0


def _cmd_lmo_test(args) -> int:
    rng = np.random.default_rng(args.seed)
    for trial in range(args.trials):
        dim = int(rng.integers(1, args.max_dim + 1))
        g = rng.standard_normal(dim)
        u = lmo_l1(g, args.radius)
        vertices = np.vstack([np.eye(dim) * args.radius, -np.eye(dim) * args.radius])
        best = float(np.min(vertices @ g))
        if abs(float(u @ g) - best) > 1e-12:
            print(f"lmo-test: FAIL at trial {trial}: {u @ g} vs vertex minimum {best}")
            return 2
    print(f"lmo-test: {args.trials} trials OK (max dim {args.max_dim})")
    return 0


def _cmd_spectrum(args) -> int:
    cfg_like = RunConfig(solver="dstofw", dataset="synthetic", objective="convex",
                         iters=0, m=args.m, topology=args.topology,
                         topology_seed=args.topology_seed)
    topo = _build_topology(cfg_like)
    wmat = graph.metropolis_weights(topo)
    print(f"m={args.m} topology={args.topology} edges={len(topo.edges)}")
    print(f"lambda2={wmat.lambda2:.12g}")
    print(f"k0(alpha={args.alpha})={graph.k0_alpha(wmat.lambda2, args.alpha)}")
    return 0


def main(argv=None) -> int:
    try:
        args = _make_parser().parse_args(argv)
        if args.command == "run":
            return _cmd_run(args)
        if args.command == "lmo-test":
            return _cmd_lmo_test(args)
        return _cmd_spectrum(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 3
    except (metrics.InvariantError, graph.SpectrumError, prob.ParseError,
            ValueError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
