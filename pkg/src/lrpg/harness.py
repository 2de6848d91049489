"""Multi-seed experiments: config files, runs, aggregation and CSV export.

Config files are flat ``key = value`` lines; ``#`` starts a comment and list
values are whitespace separated. Keys of the form ``env.<constant>`` override
environment constants, and ``lrpg.<key>`` / ``rvfb.<key>`` override a
training key for one algorithm only. Unknown keys are errors.
"""

from __future__ import annotations

import math
import traceback
from concurrent.futures import ProcessPoolExecutor, as_completed
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional

import numpy as np

from .envs import ENVIRONMENTS, make_env
from .factored import new_factored, param_count, save_checkpoint
from .grid import Dim, GridSpec
from .mlp import mlp_param_count, new_mlp, rvfb_train
from .policy import FactoredSigma, FixedSigma, PolicyParams
from .trainer import ACTOR_CRITIC, REINFORCE, Hyper, train

ALGORITHMS = ("lrpg", "rvfb")

# Per-environment defaults that are not global defaults.
ENV_DEFAULTS = {
    "pendulum": {"bins": [20, 20], "hidden": [64, 64]},
    "acrobot": {"bins": [4, 4, 4, 4], "hidden": [16, 16]},
    "goddard": {"bins": [4, 4, 8], "hidden": [32, 32]},
    "bandit": {"bins": [1, 1], "hidden": [8]},
}

HYPER_KEYS = ("gamma", "alpha_mu", "alpha_sigma", "alpha_omega", "episodes", "horizon", "mode")


class ConfigError(ValueError):
    pass


def _float(v):
    x = float(v)
    if not math.isfinite(x):
        raise ValueError("not finite")
    return x


def _ints(v):
    return [int(t) for t in v.split()]


def _floats(v):
    return [_float(t) for t in v.split()]


# key -> (parser, default). A default of None means "not set".
_SCHEMA = {
    "env": (str, None),
    "algorithm": (lambda v: v.split(), ["lrpg"]),
    "bins": (_ints, None),
    "low": (_floats, None),
    "high": (_floats, None),
    "row_group": (_ints, None),
    "col_group": (_ints, None),
    "rank": (int, 4),
    "sigma_mode": (str, "fixed"),
    "sigma": (_float, 0.5),
    "sigma_floor": (_float, 1e-3),
    "mu_init_scale": (_float, 0.1),
    "sigma_init_scale": (_float, 0.5),
    "omega_init_scale": (_float, 0.1),
    "hidden": (_ints, None),
    "gamma": (_float, 0.99),
    "alpha_mu": (_float, 1e-3),
    "alpha_sigma": (_float, 1e-4),
    "alpha_omega": (_float, 1e-3),
    "episodes": (int, 1000),
    "horizon": (int, None),
    "mode": (str, ACTOR_CRITIC),
    "seeds": (_ints, [0]),
    "out": (str, "results"),
    "smoothing": (int, 50),
}

_PER_ALGORITHM = set(HYPER_KEYS) | {"sigma"}


@dataclass
class RunConfig:
    env: str
    env_overrides: dict = field(default_factory=dict)
    algorithms: list = field(default_factory=lambda: ["lrpg"])
    grid: Optional[GridSpec] = None
    rank: int = 4
    sigma_mode: str = "fixed"
    sigma: float = 0.5
    sigma_floor: float = 1e-3
    mu_init_scale: float = 0.1
    sigma_init_scale: float = 0.5
    omega_init_scale: float = 0.1
    hidden: list = field(default_factory=lambda: [64])
    hyper: Hyper = field(default_factory=Hyper)
    overrides: dict = field(default_factory=dict)  # algorithm -> {key: value}
    seeds: list = field(default_factory=lambda: [0])
    out: str = "results"
    smoothing: int = 50
    source: str = ""

    def hyper_for(self, algorithm: str) -> Hyper:
        over = {k: v for k, v in self.overrides.get(algorithm, {}).items() if k in HYPER_KEYS}
        return replace(self.hyper, **over)

    def sigma_for(self, algorithm: str) -> float:
        return self.overrides.get(algorithm, {}).get("sigma", self.sigma)

    def make_env(self):
        return make_env(self.env, **self.env_overrides)


def _parse_env_value(env_name, const, raw, lineno):
    cls = ENVIRONMENTS[env_name]
    if const not in cls.constant_names():
        raise ConfigError(f"line {lineno}: env.{const}: unknown constant for environment {env_name!r}")
    default = getattr(cls, "__dataclass_fields__")[const].default
    try:
        return int(raw) if isinstance(default, int) else _float(raw)
    except ValueError:
        raise ConfigError(f"line {lineno}: env.{const}: expected a number, got {raw!r}") from None


def parse_config_text(text: str) -> RunConfig:
    values, lines_of = {}, {}
    env_raw, per_alg = {}, {}
    for lineno, raw_line in enumerate(text.splitlines(), start=1):
        line = raw_line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw_line.strip()!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        if not value:
            raise ConfigError(f"line {lineno}: {key}: missing value")
        if key in lines_of:
            raise ConfigError(f"line {lineno}: {key}: duplicate key (first set on line {lines_of[key]})")
        lines_of[key] = lineno
        prefix, _, rest = key.partition(".")
        if prefix == "env" and rest:
            env_raw[rest] = (value, lineno)
            continue
        if prefix in ALGORITHMS and rest:
            if rest not in _PER_ALGORITHM:
                raise ConfigError(f"line {lineno}: {key}: only {sorted(_PER_ALGORITHM)} can be set per algorithm")
            parser = _SCHEMA[rest][0]
            try:
                per_alg.setdefault(prefix, {})[rest] = parser(value)
            except ValueError as e:
                raise ConfigError(f"line {lineno}: {key}: bad value {value!r} ({e})") from None
            continue
        if key not in _SCHEMA:
            raise ConfigError(f"line {lineno}: {key}: unknown key")
        try:
            values[key] = _SCHEMA[key][0](value)
        except ValueError as e:
            raise ConfigError(f"line {lineno}: {key}: bad value {value!r} ({e})") from None

    def where(key):
        return f"line {lines_of[key]}: {key}" if key in lines_of else key

    def get(key):
        return values.get(key, _SCHEMA[key][1])

    env = values.get("env")
    if env is None:
        raise ConfigError("env: required key missing")
    if env not in ENVIRONMENTS:
        raise ConfigError(f"{where('env')}: unknown environment {env!r}; choose from {sorted(ENVIRONMENTS)}")
    env_overrides = {k: _parse_env_value(env, k, v, n) for k, (v, n) in env_raw.items()}
    try:
        env_obj = make_env(env, **env_overrides)
    except ValueError as e:
        raise ConfigError(f"env overrides: {e}") from None
    espec = env_obj.spec()

    algorithms = get("algorithm")
    for a in algorithms:
        if a not in ALGORITHMS:
            raise ConfigError(f"{where('algorithm')}: unknown algorithm {a!r}; choose from {list(ALGORITHMS)}")
    if len(set(algorithms)) != len(algorithms):
        raise ConfigError(f"{where('algorithm')}: repeated algorithm")

    rank = get("rank")
    if rank < 1:
        raise ConfigError(f"{where('rank')}: must be >= 1, got {rank}")

    defaults = ENV_DEFAULTS.get(env, {})
    bins = get("bins") or defaults.get("bins")
    low = get("low") or list(espec.state_low)
    high = get("high") or list(espec.state_high)
    for key, seq in (("bins", bins), ("low", low), ("high", high)):
        if len(seq) != espec.state_dim:
            raise ConfigError(f"{where(key)}: expected {espec.state_dim} values for {env}, got {len(seq)}")
    if min(bins) < 1:
        raise ConfigError(f"{where('bins')}: every dimension needs at least one bin")
    try:
        dims = [Dim(lo, hi, b) for lo, hi, b in zip(low, high, bins)]
        if "row_group" in values or "col_group" in values:
            rg = get("row_group")
            cg = get("col_group")
            if rg is None or cg is None:
                raise ConfigError("row_group/col_group: set both or neither")
            grid = GridSpec(tuple(dims), tuple(rg), tuple(cg))
        else:
            grid = GridSpec.split(dims)
    except ConfigError:
        raise
    except ValueError as e:
        raise ConfigError(f"grid: {e}") from None

    sigma_mode = get("sigma_mode")
    if sigma_mode not in ("fixed", "factored"):
        raise ConfigError(f"{where('sigma_mode')}: must be 'fixed' or 'factored'")
    for key in ("sigma", "sigma_floor", "smoothing"):
        if get(key) <= 0:
            raise ConfigError(f"{where(key)}: must be positive")
    for key in ("mu_init_scale", "sigma_init_scale", "omega_init_scale"):
        if get(key) < 0:
            raise ConfigError(f"{where(key)}: must be non-negative")
    hidden = get("hidden") or defaults.get("hidden", [64])
    if min(hidden) < 1:
        raise ConfigError(f"{where('hidden')}: layer sizes must be positive")

    seeds = get("seeds")
    if not seeds or len(set(seeds)) != len(seeds):
        raise ConfigError(f"{where('seeds')}: seeds must be non-empty and distinct")

    hyper_kwargs = {k: get(k) for k in HYPER_KEYS}
    if hyper_kwargs["horizon"] is None:
        hyper_kwargs["horizon"] = espec.horizon
    try:
        hyper = Hyper(**hyper_kwargs)
        for alg, over in per_alg.items():
            replace(hyper, **{k: v for k, v in over.items() if k in HYPER_KEYS})
            if over.get("sigma", 1.0) <= 0:
                raise ValueError("sigma must be positive")
    except ValueError as e:
        bad = next((k for k in HYPER_KEYS if k in str(e)), "hyper")
        raise ConfigError(f"{where(bad)}: {e}") from None

    return RunConfig(
        env=env, env_overrides=env_overrides, algorithms=algorithms, grid=grid, rank=rank,
        sigma_mode=sigma_mode, sigma=get("sigma"), sigma_floor=get("sigma_floor"),
        mu_init_scale=get("mu_init_scale"), sigma_init_scale=get("sigma_init_scale"),
        omega_init_scale=get("omega_init_scale"), hidden=hidden, hyper=hyper,
        overrides=per_alg, seeds=seeds, out=get("out"), smoothing=get("smoothing"), source=text)


def parse_config(path) -> RunConfig:
    p = Path(path)
    try:
        text = p.read_text()
    except FileNotFoundError:
        raise ConfigError(f"{path}: config file not found") from None
    try:
        return parse_config_text(text)
    except ConfigError as e:
        raise ConfigError(f"{path}: {e}") from None


# ---------------------------------------------------------------------------
# model construction and single-seed runs

def build_lrpg(cfg: RunConfig, rng: np.random.Generator):
    """Draw ``x_mu``, then ``x_sigma`` (factored mode only), then ``x_omega``."""
    n, m = cfg.grid.rows, cfg.grid.cols
    x_mu = new_factored(n, m, cfg.rank, cfg.mu_init_scale, rng)
    if cfg.sigma_mode == "factored":
        sigma = FactoredSigma(new_factored(n, m, cfg.rank, cfg.sigma_init_scale, rng), cfg.sigma_floor)
    else:
        sigma = FixedSigma(cfg.sigma_for("lrpg"))
    x_omega = new_factored(n, m, cfg.rank, cfg.omega_init_scale, rng)
    return PolicyParams(x_mu, sigma), x_omega


def lrpg_param_count(policy: PolicyParams) -> int:
    """Actor parameters only (mean factors, plus sigma factors when learned)."""
    count = param_count(policy.x_mu)
    if isinstance(policy.sigma, FactoredSigma):
        count += param_count(policy.sigma.x_sigma)
    return count


def build_rvfb(cfg: RunConfig, rng: np.random.Generator):
    state_dim = cfg.make_env().spec().state_dim
    sizes = [state_dim, *cfg.hidden, 1]
    return new_mlp(sizes, rng), new_mlp(sizes, rng)


def model_param_count(cfg: RunConfig, algorithm: str) -> int:
    rng = np.random.default_rng(0)
    if algorithm == "lrpg":
        return lrpg_param_count(build_lrpg(cfg, rng)[0])
    return mlp_param_count(build_rvfb(cfg, rng)[0])


@dataclass
class SeedResult:
    algorithm: str
    seed: int
    returns: Optional[np.ndarray]
    params: int
    error: Optional[str] = None
    models: dict = field(default_factory=dict)

    @property
    def failed(self) -> bool:
        return self.error is not None


def run_seed(cfg: RunConfig, algorithm: str, seed: int) -> SeedResult:
    """One independent training run; the only randomness is ``default_rng(seed)``."""
    rng = np.random.default_rng(seed)
    hyper = cfg.hyper_for(algorithm)
    env = cfg.make_env()
    env.horizon = hyper.horizon
    try:
        if algorithm == "lrpg":
            policy, x_omega = build_lrpg(cfg, rng)
            params = lrpg_param_count(policy)
            models = {"policy": policy, "x_omega": x_omega}
            returns = train(env, policy, x_omega, cfg.grid, hyper, rng)
        else:
            actor, critic = build_rvfb(cfg, rng)
            params = mlp_param_count(actor)
            models = {"actor": actor, "critic": critic}
            returns = rvfb_train(env, actor, critic, hyper, cfg.sigma_for("rvfb"), rng)
    except Exception as exc:  # a failed seed must not abort the others
        return SeedResult(algorithm, seed, None, model_param_count(cfg, algorithm),
                          error="".join(traceback.format_exception_only(type(exc), exc)).strip())
    return SeedResult(algorithm, seed, returns, params, models=models)


def _run_seed_packed(args):
    return run_seed(*args)


def run_experiment(cfg: RunConfig, out_dir=None, jobs: int = 1, log=None) -> dict:
    """Train every (algorithm, seed) pair; returns ``{algorithm: [SeedResult sorted by seed]}``.

    Per-seed return series are written to ``<out>/<algorithm>/seed_<s>.csv``
    as soon as each run completes. Results do not depend on ``jobs``.
    """
    out = Path(out_dir) if out_dir is not None else None
    tasks = [(cfg, alg, s) for alg in cfg.algorithms for s in cfg.seeds]
    results = {alg: [] for alg in cfg.algorithms}

    def collect(res: SeedResult):
        results[res.algorithm].append(res)
        if out is not None:
            _write_seed(out, res)
        if log:
            status = f"FAILED: {res.error}" if res.failed else (
                f"final mean return {tail_mean(res.returns):.3f}")
            log(f"[{res.algorithm} seed {res.seed}] {status}")

    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            futures = [pool.submit(_run_seed_packed, t) for t in tasks]
            for fut in as_completed(futures):
                collect(fut.result())
    else:
        for t in tasks:
            collect(run_seed(*t))
    for alg in results:
        results[alg].sort(key=lambda r: r.seed)
    return results


# ---------------------------------------------------------------------------
# aggregation

def moving_average(x, window: int) -> np.ndarray:
    """Trailing mean over the last ``window`` points (fewer at the start)."""
    x = np.asarray(x, dtype=np.float64)
    if window <= 1:
        return x.copy()
    c = np.concatenate(([0.0], np.cumsum(x)))
    idx = np.arange(1, x.size + 1)
    lo = np.maximum(idx - window, 0)
    return (c[idx] - c[lo]) / (idx - lo)


def aggregate_median(series, window: Optional[int] = None) -> np.ndarray:
    """Episode-wise median across seeds, optionally smoothed afterwards."""
    series = [np.asarray(s, dtype=np.float64) for s in series]
    if not series:
        raise ValueError("no series to aggregate")
    if len({s.shape for s in series}) != 1 or series[0].ndim != 1:
        raise ValueError("series must all be 1-d and of equal length")
    med = np.median(np.stack(series), axis=0)
    return moving_average(med, window) if window else med


def tail_mean(returns) -> float:
    """Mean of the last 100 episodes, or of the last 10% when there are fewer than 1000."""
    r = np.asarray(returns, dtype=np.float64)
    n = 100 if r.size >= 1000 else max(1, int(math.ceil(0.1 * r.size)))
    return float(r[-n:].mean())


def episodes_to_90pct(curve, window: int = 50) -> int:
    """First episode where the smoothed curve covers 90% of its start-to-end change.

    The curve is smoothed with a trailing window; the start value is the first
    full-window average and the end value the last one. Returns that first
    full-window episode when the curve has no net change.
    """
    c = np.asarray(curve, dtype=np.float64)
    w = max(1, min(window, c.size))
    s = moving_average(c, w)
    first = w - 1
    start, end = s[first], s[-1]
    gap = end - start
    if gap == 0:
        return first
    progress = (s[first:] - start) / gap
    return first + int(np.argmax(progress >= 0.9))


# ---------------------------------------------------------------------------
# export

def _fmt(x: float) -> str:
    return repr(float(x))


def _write_seed(out: Path, res: SeedResult):
    d = out / res.algorithm
    d.mkdir(parents=True, exist_ok=True)
    path = d / f"seed_{res.seed}.csv"
    if res.failed:
        path.write_text(f"# failed: {res.error}\n")
        return
    lines = ["episode,return"] + [f"{h},{_fmt(r)}" for h, r in enumerate(res.returns)]
    path.write_text("\n".join(lines) + "\n")


def _save_models(d: Path, res: SeedResult):
    d.mkdir(parents=True, exist_ok=True)
    if res.algorithm == "lrpg":
        policy = res.models["policy"]
        save_checkpoint(policy.x_mu, d / f"seed_{res.seed}_mu.ckpt")
        if isinstance(policy.sigma, FactoredSigma):
            save_checkpoint(policy.sigma.x_sigma, d / f"seed_{res.seed}_sigma.ckpt")
        save_checkpoint(res.models["x_omega"], d / f"seed_{res.seed}_omega.ckpt")
    else:
        for role in ("actor", "critic"):
            net = res.models[role]
            arrays = {f"w{l}": w for l, w in enumerate(net.weights)}
            arrays.update({f"b{l}": b for l, b in enumerate(net.biases)})
            np.savez(d / f"seed_{res.seed}_{role}.npz", **arrays)


SUMMARY_HEADER = "env,algorithm,params,median_return,episodes_to_90pct,seeds,failed"


def summarize(cfg: RunConfig, results: dict) -> list[dict]:
    rows = []
    for alg in cfg.algorithms:
        ok = [r for r in results[alg] if not r.failed]
        row = {"env": cfg.env, "algorithm": alg,
               "params": results[alg][0].params if results[alg] else model_param_count(cfg, alg),
               "seeds": len(results[alg]), "failed": len(results[alg]) - len(ok)}
        if ok:
            row["median_return"] = float(np.median([tail_mean(r.returns) for r in ok]))
            row["episodes_to_90pct"] = episodes_to_90pct(
                aggregate_median([r.returns for r in ok]), cfg.smoothing)
        else:
            row["median_return"] = float("nan")
            row["episodes_to_90pct"] = -1
        rows.append(row)
    return rows


def export(cfg: RunConfig, results: dict, out_dir) -> list[Path]:
    """Write ``summary.csv``, ``config.txt`` and per-algorithm ``curve.csv`` + checkpoints."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    for alg in cfg.algorithms:
        ok = [r for r in results[alg] if not r.failed]
        d = out / alg
        d.mkdir(parents=True, exist_ok=True)
        if ok:
            med = aggregate_median([r.returns for r in ok])
            lines = ["episode,median_return"] + [f"{h},{_fmt(v)}" for h, v in enumerate(med)]
            (d / "curve.csv").write_text("\n".join(lines) + "\n")
            written.append(d / "curve.csv")
        for r in ok:
            _save_models(d / "checkpoints", r)

    rows = summarize(cfg, results)
    lines = [SUMMARY_HEADER]
    for row in rows:
        lines.append(",".join([row["env"], row["algorithm"], str(row["params"]),
                               _fmt(row["median_return"]), str(row["episodes_to_90pct"]),
                               str(row["seeds"]), str(row["failed"])]))
    (out / "summary.csv").write_text("\n".join(lines) + "\n")
    (out / "config.txt").write_text(cfg.source if cfg.source.endswith("\n") else cfg.source + "\n")
    written += [out / "summary.csv", out / "config.txt"]
    return written
