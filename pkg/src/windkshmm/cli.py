"""Command-line entry point: ``windkshmm {benchmark,forecast,diagnose,synth}``.

Exit codes: 0 success, 1 configuration error, 2 data error, 3 compute error.
A JSON config file (``--config``) may supply any long option using its
dest name (e.g. ``"rank": 6``, ``"methods": ["PST", "KSHMM-PST"]``);
command-line flags take precedence.
"""
from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np

from . import dataset, harness, kernels, kshmm, methods
from .baselines import stattools, svr
from .errors import ConfigError, DataFormatError, ForecastError, InvalidInputError
from .switching import envelope, kshmm_pst_forecast

log = logging.getLogger("windkshmm")

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_COMPUTE = 0, 1, 2, 3


@dataclass
class RunConfig:
    train_csv: list = field(default_factory=list)
    test_csv: list = field(default_factory=list)
    data_csv: list = field(default_factory=list)
    turbine_id: list = field(default_factory=list)
    synthetic: bool = False
    seed: int = 0
    train_start: str = dataset.DEFAULT_TRAIN_START
    test_start: str = dataset.DEFAULT_TEST_START
    train_len: int = dataset.DEFAULT_WINDOW_LENGTH
    test_len: int = dataset.DEFAULT_WINDOW_LENGTH
    methods: list = field(default_factory=lambda: list(methods.METHOD_NAMES))
    rank: int = kshmm.DEFAULT_RANK
    lam: float | None = None
    sigma: float | None = None
    epsilon: float = svr.DEFAULT_EPSILON
    sigma_grid: list = field(default_factory=lambda: list(svr.SIGMA_GRID))
    c_grid: list = field(default_factory=lambda: list(svr.C_GRID))
    arma_cap: int = stattools.CUTOFF_CAP
    fill: str = "error"
    out: str | None = None
    format: str = "csv"
    jobs: int = 0

    def validate(self, command: str = "benchmark") -> None:
        if command == "benchmark":
            if not self.methods:
                raise ConfigError("at least one method is required")
            unknown = [m for m in self.methods if m not in methods.METHOD_NAMES]
            if unknown:
                raise ConfigError(f"unknown method(s) {unknown}; choose from {list(methods.METHOD_NAMES)}")
            if len(set(self.methods)) != len(self.methods):
                raise ConfigError("methods must not repeat")
            if len(self.train_csv) != len(self.test_csv):
                raise ConfigError("--train-csv and --test-csv must be given the same number of times")
            n_sources = len(self.train_csv) + len(self.data_csv) + int(self.synthetic)
            if n_sources == 0:
                raise ConfigError("no data: give --train-csv/--test-csv, --data-csv or --synthetic")
            if self.turbine_id and len(self.turbine_id) != len(self.train_csv) + len(self.data_csv):
                raise ConfigError("--turbine-id must be given once per turbine")
            if self.out is None:
                raise ConfigError("--out is required")
            if self.format not in ("csv", "markdown"):
                raise ConfigError("--format must be csv or markdown")
        if self.rank < 1:
            raise ConfigError("--rank must be >= 1")
        if self.lam is not None and not (math.isfinite(self.lam) and self.lam > 0):
            raise ConfigError("--lambda must be positive")
        if self.sigma is not None and not (math.isfinite(self.sigma) and self.sigma > 0):
            raise ConfigError("--sigma must be positive")
        if not (self.epsilon >= 0):
            raise ConfigError("--epsilon must be nonnegative")
        for name, grid in (("sigma_grid", self.sigma_grid), ("c_grid", self.c_grid)):
            if not grid or not all(isinstance(v, (int, float)) and math.isfinite(v) and v > 0 for v in grid):
                raise ConfigError(f"{name} must be a nonempty list of positive numbers")
        if self.arma_cap < 1:
            raise ConfigError("--arma-cap must be >= 1")
        if self.train_len < 4 or self.test_len < 4:
            raise ConfigError("train/test lengths must be >= 4")
        if self.fill not in dataset.FILL_POLICIES:
            raise ConfigError(f"--fill must be one of {dataset.FILL_POLICIES}")
        if self.jobs < 0:
            raise ConfigError("--jobs must be >= 0")


# The fixture used by ``--synthetic``: two persistent regimes of calm and
# strong wind.
SYNTHETIC_SPEC = dataset.GaussianHmmSpec(
    transition=np.array([[0.95, 0.10], [0.05, 0.90]]),
    means=np.array([3.0, 8.0]),
    variances=np.array([1.0, 1.5]),
)


def _method_groups(names):
    """Methods that share training work run in the same task."""
    groups, seen = [], set()
    pairs = {"ARMA-AIC": "ARMA-BIC", "ARMA-BIC": "ARMA-AIC", "KSHMM": "KSHMM-PST", "KSHMM-PST": "KSHMM"}
    for n in names:
        if n in seen:
            continue
        g = [n]
        if pairs.get(n) in names:
            g.append(pairs[n])
        seen.update(g)
        groups.append(g)
    return groups


def _run_group(args):
    cfg, train, test, names = args
    out = {}
    for f in methods.build_methods(names, rank=cfg.rank, lam=cfg.lam, sigma=cfg.sigma,
                                   epsilon=cfg.epsilon, sigma_grid=cfg.sigma_grid, c_grid=cfg.c_grid,
                                   arma_cap=cfg.arma_cap, cache={}):
        try:
            out[f.name] = harness.rolling_evaluate(f, train, test)
        except ForecastError as exc:
            raise type(exc)(f"turbine {train.turbine_id}, method {f.name}: {exc}") from exc
    return out


def load_turbines(cfg: RunConfig):
    pairs = []
    ids = list(cfg.turbine_id)
    for tr_path, te_path in zip(cfg.train_csv, cfg.test_csv):
        tid = ids.pop(0) if ids else Path(tr_path).stem
        tr = dataset.load_csv(tr_path, turbine_id=tid, fill=cfg.fill)
        te = dataset.load_csv(te_path, turbine_id=tid, fill=cfg.fill)
        tr = dataset.slice_series(tr, 0, min(cfg.train_len, len(tr)))
        te = dataset.slice_series(te, 0, min(cfg.test_len, len(te)))
        pairs.append((tr, te))
    for path in cfg.data_csv:
        tid = ids.pop(0) if ids else Path(path).stem
        s = dataset.load_csv(path, turbine_id=tid, fill=cfg.fill)
        spec = dataset.SplitSpec(s.index_of(cfg.train_start), cfg.train_len,
                                 s.index_of(cfg.test_start), cfg.test_len)
        pairs.append(dataset.split(s, spec))
    if cfg.synthetic:
        s = dataset.synth_hmm_series(SYNTHETIC_SPEC, cfg.train_len + cfg.test_len, cfg.seed,
                                     turbine_id=f"synthetic-{cfg.seed}")
        pairs.append(dataset.split(s, dataset.SplitSpec(0, cfg.train_len, cfg.train_len, cfg.test_len)))
    return pairs


def load_training(cfg: RunConfig) -> dataset.WindSeries:
    """First ``train_len`` points of the first training CSV, as in the benchmark."""
    tr = dataset.load_csv(cfg.train_csv[0], fill=cfg.fill)
    return dataset.slice_series(tr, 0, min(cfg.train_len, len(tr)))


def run_benchmark(cfg: RunConfig) -> harness.ComparisonTable:
    pairs = load_turbines(cfg)
    tasks = [(cfg, tr, te, g) for tr, te in pairs for g in _method_groups(cfg.methods)]
    jobs = cfg.jobs or os.cpu_count() or 1
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            outputs = list(ex.map(_run_group, tasks))
    else:
        outputs = [_run_group(t) for t in tasks]
    rows = []
    k = 0
    for tr, _ in pairs:
        merged = {}
        for _ in _method_groups(cfg.methods):
            merged.update(outputs[k])
            k += 1
        rows.append(harness.ComparisonRow(tr.turbine_id, {m: merged[m] for m in cfg.methods}))
    return harness.ComparisonTable(list(cfg.methods), rows)


def cmd_benchmark(cfg: RunConfig) -> int:
    cfg.validate("benchmark")
    table = run_benchmark(cfg)
    harness.emit_report(table, cfg.format, cfg.out)
    sys.stdout.write(harness.markdown_table(table))
    return EXIT_OK


def _parse_floats(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"could not parse number list {text!r}") from None


def cmd_forecast(cfg: RunConfig, model_path=None, observations=None, obs_csv=None,
                 save_model=None, last_train=None) -> int:
    cfg.validate("forecast")
    if model_path is None and not cfg.train_csv:
        raise ConfigError("forecast needs --model or --train-csv")
    if model_path is not None:
        model = kshmm.load_model(model_path)
        last = last_train
    else:
        train = load_training(cfg)
        model = kshmm.fit(train.values, rank=cfg.rank, lam=cfg.lam, sigma=cfg.sigma)
        last = float(train.values[-1])
    if save_model:
        kshmm.save_model(model, save_model)
    obs = list(observations or [])
    if obs_csv:
        obs += list(dataset.load_csv(obs_csv, fill=cfg.fill).values)
    if obs:
        last = float(obs[-1])
    if last is None:
        last = float(model.x2[-1])

    belief = kshmm.filter_init(model)
    fd = None
    try:
        for x in obs:
            belief = kshmm.filter_update(model, belief, float(x))
        fd = kshmm.forecast(model, belief)
    except ForecastError as exc:
        log.warning("KSHMM step unstable: %s", exc)
    value, switched = kshmm_pst_forecast(fd, last, envelope(model.x2))
    out = {
        "pred_mean": fd.mean if fd else None,
        "pred_var": fd.variance if fd else None,
        "mode": fd.mode if fd else None,
        "forecast": value,
        "stable": (not switched),
        "switched": switched,
        "mode_converged": fd.mode_converged if fd else False,
    }
    print(json.dumps(out))
    return EXIT_OK


def cmd_diagnose(cfg: RunConfig) -> int:
    cfg.validate("diagnose")
    if not cfg.train_csv:
        raise ConfigError("diagnose needs --train-csv")
    train = load_training(cfg)
    x = train.values
    sigma = cfg.sigma if cfg.sigma is not None else kernels.median_heuristic(x)
    m = x.size - 2
    lam = cfg.lam if cfg.lam is not None else kshmm.default_lambda(m)
    model = kshmm.train(kshmm.reshape_sliding(x), kshmm.KernelConfig(sigma=sigma), rank=cfg.rank, lam=lam)
    cap = min(cfg.arma_cap, x.size - 2)
    out = {
        "turbine": train.turbine_id,
        "n": int(x.size),
        "m": m,
        "sigma": sigma,
        "lambda": lam,
        "rank": cfg.rank,
        "eigenvalues": [float(v) for v in model.omega],
        "pacf_cutoff": stattools.cutoff_lag(stattools.pacf(x, cap), x.size, cap),
        "acf_cutoff": stattools.cutoff_lag(stattools.acf(x, cap), x.size, cap),
    }
    print(json.dumps(out, indent=2))
    return EXIT_OK


def cmd_synth(cfg: RunConfig, length: int) -> int:
    cfg.validate("synth")
    if cfg.out is None:
        raise ConfigError("--out is required")
    if length < 1:
        raise ConfigError("--length must be positive")
    s = dataset.synth_hmm_series(SYNTHETIC_SPEC, length, cfg.seed, turbine_id=f"synthetic-{cfg.seed}")
    dataset.write_csv(s, cfg.out)
    return EXIT_OK


def _add_common(p: argparse.ArgumentParser) -> None:
    S = argparse.SUPPRESS
    p.add_argument("--config", help="JSON file of option defaults")
    p.add_argument("--train-csv", action="append", dest="train_csv", default=S)
    p.add_argument("--test-csv", action="append", dest="test_csv", default=S)
    p.add_argument("--data-csv", action="append", dest="data_csv", default=S,
                   help="single CSV covering both windows; split by --train-start/--test-start")
    p.add_argument("--turbine-id", action="append", dest="turbine_id", default=S)
    p.add_argument("--synthetic", action="store_true", default=S)
    p.add_argument("--seed", type=int, default=S)
    p.add_argument("--train-start", dest="train_start", default=S)
    p.add_argument("--test-start", dest="test_start", default=S)
    p.add_argument("--train-len", dest="train_len", type=int, default=S)
    p.add_argument("--test-len", dest="test_len", type=int, default=S)
    p.add_argument("--methods", type=lambda s: [m.strip() for m in s.split(",") if m.strip()], default=S,
                   help=f"comma list from {','.join(methods.METHOD_NAMES)}")
    p.add_argument("--rank", type=int, default=S)
    p.add_argument("--lambda", dest="lam", type=float, default=S)
    p.add_argument("--sigma", type=float, default=S)
    p.add_argument("--epsilon", type=float, default=S)
    p.add_argument("--sigma-grid", dest="sigma_grid", type=_parse_floats, default=S,
                   help="comma-separated SVR bandwidth grid")
    p.add_argument("--c-grid", dest="c_grid", type=_parse_floats, default=S,
                   help="comma-separated SVR box-constraint grid")
    p.add_argument("--arma-cap", dest="arma_cap", type=int, default=S)
    p.add_argument("--fill", default=S, help="missing-data policy: error | forward-fill")
    p.add_argument("--out", default=S)
    p.add_argument("--format", default=S)
    p.add_argument("--jobs", type=int, default=S, help="worker processes (0 = all cores)")
    p.add_argument("-v", "--verbose", action="count", default=0)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="windkshmm", description="KSHMM wind-speed forecasting benchmark")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_ in (("benchmark", "rolling evaluation of all methods"),
                        ("forecast", "next-step KSHMM(-PST) forecast"),
                        ("diagnose", "print bandwidth, lambda, spectrum and lag cut-offs"),
                        ("synth", "write a synthetic fixture CSV")):
        p = sub.add_parser(name, help=help_)
        _add_common(p)
        if name == "forecast":
            p.add_argument("--model", help="saved model (.npz)")
            p.add_argument("--save-model", dest="save_model")
            p.add_argument("--observations", type=_parse_floats, default=None,
                           help="comma-separated test observations")
            p.add_argument("--obs-csv", dest="obs_csv")
            p.add_argument("--last", type=float, default=None,
                           help="previous observation for the persistence fallback")
        if name == "synth":
            p.add_argument("--length", type=int, default=dataset.DEFAULT_WINDOW_LENGTH)
    return parser


def make_config(ns: argparse.Namespace) -> RunConfig:
    values = {}
    if getattr(ns, "config", None):
        try:
            values.update(json.loads(Path(ns.config).read_text()))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {ns.config}: {exc}") from None
    names = {f.name for f in fields(RunConfig)}
    unknown = set(values) - names
    if unknown:
        raise ConfigError(f"unknown config keys {sorted(unknown)}")
    for name in names:
        if hasattr(ns, name):
            values[name] = getattr(ns, name)
    for key in ("train_csv", "test_csv", "data_csv", "turbine_id", "methods"):
        if key in values and isinstance(values[key], str):
            values[key] = [values[key]]
    return RunConfig(**values)


def main(argv=None) -> int:
    parser = build_parser()
    try:
        ns = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits with 2 on usage errors; those are configuration errors here
        return EXIT_OK if exc.code in (0, None) else EXIT_CONFIG
    logging.basicConfig(level=logging.WARNING - 10 * min(ns.verbose, 2), stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = make_config(ns)
        if ns.command == "benchmark":
            return cmd_benchmark(cfg)
        if ns.command == "forecast":
            return cmd_forecast(cfg, ns.model, ns.observations, ns.obs_csv, ns.save_model, ns.last)
        if ns.command == "diagnose":
            return cmd_diagnose(cfg)
        return cmd_synth(cfg, ns.length)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except FileNotFoundError as exc:
        print(f"data error: file not found: {exc.filename}", file=sys.stderr)
        return EXIT_DATA
    except (DataFormatError, InvalidInputError, OSError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (ForecastError, np.linalg.LinAlgError) as exc:
        print(f"compute error: {exc}", file=sys.stderr)
        return EXIT_COMPUTE


if __name__ == "__main__":
    sys.exit(main())
