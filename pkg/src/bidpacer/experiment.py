"""Configuration-driven experiment runner and report writer.

Configs are flat ``key = value`` text: per-policy hyperparameters use
``policy.<name>.<param>`` keys and market-family parameters use
``market.<param>`` keys.  Runs are paired by default: every policy faces
the same market realization in each trial.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .distribution import empirical_pmf, make_family
from .harness import (
    competitive_ratio,
    convergence_curve,
    offline_optimal,
    paired_ttest,
    run_simulation,
)
from .market import ReplayMarket, StochasticMarket, load_replay
from .policies import canonical_policy_name, make_policy
from .value_iteration import calibrate_budget, solve

logger = logging.getLogger(__name__)

_MARKET_STREAM = 1009
_POLICY_STREAM = 2003


class ConfigError(ValueError):
    """Invalid or inconsistent experiment configuration."""


class ExperimentError(RuntimeError):
    """An experiment could not be run or reported."""


@dataclass(frozen=True)
class PolicySpec:
    name: str
    params: dict


@dataclass(frozen=True)
class ExperimentConfig:
    mode: str
    horizon: int
    periods: int
    trials: int
    seed: int
    ctr: float
    paired: bool
    budget: int | None  # None requests calibration
    calibration_f: float
    market_family: str | None
    market_params: dict
    replay_file: str | None
    policies: tuple[PolicySpec, ...]


_POLICY_PARAM_DEFAULTS = {
    "greedy_product_limit": {
        "resolve": "auction",
        "turnbull_tol": 1e-9,
        "turnbull_max_iter": 10_000,
    },
    "lueker_learn": {"turnbull_tol": 1e-9, "turnbull_max_iter": 10_000},
    "fixed_price": {"strict_abstain": False},
    "fixed_price_search": {"grid_ratio": 1.3, "gamma": 0.1, "strict_abstain": False},
    "q_learning": {"alpha": 0.1, "epsilon": 0.1, "epsilon_decay": 0.995},
    "budget_smoothing": {"scale": "auto"},
}

_TOP_KEYS = {
    "mode",
    "horizon",
    "periods",
    "trials",
    "seed",
    "ctr",
    "paired",
    "budget",
    "calibration_f",
    "market",
    "replay_file",
    "policies",
}


def _parse_scalar(raw: str):
    text = raw.strip()
    if text.lower() == "true":
        return True
    if text.lower() == "false":
        return False
    try:
        return int(text)
    except ValueError:
        pass
    try:
        return float(text)
    except ValueError:
        pass
    return text


def _require_int(entries, key, default=None, minimum=None):
    if key not in entries:
        if default is None:
            raise ConfigError(f"missing required key '{key}'")
        return default
    value = _parse_scalar(entries[key])
    if not isinstance(value, int) or isinstance(value, bool):
        raise ConfigError(f"'{key}' must be an integer, got {entries[key]!r}")
    if minimum is not None and value < minimum:
        raise ConfigError(f"'{key}' must be >= {minimum}, got {value}")
    return value


def parse_config(text: str) -> ExperimentConfig:
    """Parse and validate a flat experiment config."""
    entries: dict[str, str] = {}
    market_params: dict = {}
    policy_params: dict[str, dict] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {line!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if key.startswith("policy."):
            parts = key.split(".", 2)
            if len(parts) != 3 or not parts[1] or not parts[2]:
                raise ConfigError(f"line {lineno}: malformed policy key {key!r}")
            try:
                name = canonical_policy_name(parts[1])
            except ValueError as exc:
                raise ConfigError(f"line {lineno}: {exc}") from None
            policy_params.setdefault(name, {})[parts[2]] = _parse_scalar(value)
        elif key.startswith("market."):
            param = key[len("market.") :]
            if not param:
                raise ConfigError(f"line {lineno}: malformed market key {key!r}")
            market_params[param] = _parse_scalar(value)
        elif key in _TOP_KEYS:
            if key in entries:
                raise ConfigError(f"line {lineno}: duplicate key '{key}'")
            entries[key] = value
        else:
            raise ConfigError(f"line {lineno}: unknown key '{key}'")

    mode = entries.get("mode", "").strip()
    if mode not in ("stochastic", "replay"):
        raise ConfigError(f"'mode' must be 'stochastic' or 'replay', got {mode!r}")
    horizon = _require_int(entries, "horizon", minimum=1)
    periods = _require_int(entries, "periods", minimum=1)
    trials = _require_int(entries, "trials", default=1, minimum=1)
    seed = _require_int(entries, "seed", default=0)

    ctr = float(_parse_scalar(entries.get("ctr", "1.0")))
    if not 0.0 < ctr <= 1.0:
        raise ConfigError(f"'ctr' must be in (0, 1], got {ctr}")

    paired = _parse_scalar(entries.get("paired", "true"))
    if not isinstance(paired, bool):
        raise ConfigError(f"'paired' must be true or false, got {entries['paired']!r}")

    budget_raw = entries.get("budget", "calibrate").strip()
    if budget_raw == "calibrate":
        budget = None
    else:
        parsed = _parse_scalar(budget_raw)
        if not isinstance(parsed, int) or isinstance(parsed, bool) or parsed < 0:
            raise ConfigError(
                f"'budget' must be a non-negative integer or 'calibrate', got {budget_raw!r}"
            )
        budget = parsed
    calibration_f = float(_parse_scalar(entries.get("calibration_f", "0.1")))
    if budget is None and not 0.0 < calibration_f < 1.0:
        raise ConfigError(f"'calibration_f' must be in (0, 1), got {calibration_f}")

    market_family = entries.get("market")
    replay_file = entries.get("replay_file")
    if mode == "stochastic":
        if not market_family:
            raise ConfigError("stochastic mode requires a 'market' family")
        if replay_file:
            raise ConfigError("stochastic mode does not take 'replay_file'")
    else:
        if not replay_file:
            raise ConfigError("replay mode requires 'replay_file'")
        if market_family or market_params:
            raise ConfigError("replay mode does not take a 'market' family")

    if "policies" not in entries or not entries["policies"].strip():
        raise ConfigError("missing required key 'policies'")
    names = []
    for token in entries["policies"].split(","):
        token = token.strip()
        if not token:
            continue
        try:
            canonical = canonical_policy_name(token)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        if canonical in names:
            raise ConfigError(f"duplicate policy '{canonical}' in 'policies'")
        names.append(canonical)
    if not names:
        raise ConfigError("'policies' must list at least one policy")

    for name in policy_params:
        if name not in names:
            raise ConfigError(
                f"hyperparameters given for '{name}' which is not in 'policies'"
            )
    specs = []
    for name in names:
        defaults = dict(_POLICY_PARAM_DEFAULTS[name])
        defaults.update(policy_params.get(name, {}))
        if name == "fixed_price" and "price" not in defaults:
            raise ConfigError("fixed_price requires 'policy.fixed_price.price'")
        specs.append(PolicySpec(name, defaults))

    return ExperimentConfig(
        mode=mode,
        horizon=horizon,
        periods=periods,
        trials=trials,
        seed=seed,
        ctr=ctr,
        paired=paired,
        budget=budget,
        calibration_f=calibration_f,
        market_family=market_family if mode == "stochastic" else None,
        market_params=market_params,
        replay_file=replay_file if mode == "replay" else None,
        policies=tuple(specs),
    )


def load_config(path) -> ExperimentConfig:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    return parse_config(text)


def _fmt_value(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def echo_config(config: ExperimentConfig) -> str:
    """Canonical round-trippable text form with every default made explicit."""
    lines = [
        f"mode = {config.mode}",
        f"horizon = {config.horizon}",
        f"periods = {config.periods}",
        f"trials = {config.trials}",
        f"seed = {config.seed}",
        f"ctr = {_fmt_value(config.ctr)}",
        f"paired = {_fmt_value(config.paired)}",
        f"budget = {'calibrate' if config.budget is None else config.budget}",
        f"calibration_f = {_fmt_value(config.calibration_f)}",
    ]
    if config.mode == "stochastic":
        lines.append(f"market = {config.market_family}")
        for key in sorted(config.market_params):
            lines.append(f"market.{key} = {_fmt_value(config.market_params[key])}")
    else:
        lines.append(f"replay_file = {config.replay_file}")
    lines.append(f"policies = {', '.join(spec.name for spec in config.policies)}")
    for spec in config.policies:
        for key in sorted(spec.params):
            lines.append(f"policy.{spec.name}.{key} = {_fmt_value(spec.params[key])}")
    return "\n".join(lines) + "\n"


@dataclass
class PolicyOutcome:
    name: str
    ratios: list[float]
    trial_logs: list
    market_seeds: list[str]


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    budget: int
    horizon: int
    periods: int
    reference: float
    reference_kind: str
    outcomes: list[PolicyOutcome]


def _policy_rng(config: ExperimentConfig, trial: int, pidx: int) -> np.random.Generator:
    return np.random.default_rng([config.seed, _POLICY_STREAM, trial, pidx])


def _market_seed(config: ExperimentConfig, trial: int, pidx: int) -> list[int]:
    key = [config.seed, _MARKET_STREAM, trial]
    if not config.paired:
        key.append(pidx)
    return key


def _run_stochastic(config: ExperimentConfig) -> ExperimentResult:
    pmf = make_family(config.market_family, **config.market_params)
    if config.budget is None:
        cal = calibrate_budget(pmf, config.horizon, config.calibration_f, config.ctr)
        if not cal.reached:
            raise ExperimentError(
                f"calibration target {config.calibration_f * config.horizon:.6g} clicks "
                f"unreachable; best attainable is {cal.value:.6g}"
            )
        budget = cal.budget
    else:
        budget = config.budget
    reference = solve(pmf, budget, config.horizon, config.ctr).value(budget, config.horizon)
    if reference <= 0.0:
        raise ExperimentError("planner reference value is zero; nothing to compete with")

    outcomes = []
    for pidx, spec in enumerate(config.policies):
        ratios: list[float] = []
        trial_logs = []
        seeds = []
        for trial in range(config.trials):
            seed_key = _market_seed(config, trial, pidx)
            market = StochasticMarket(pmf, config.ctr, np.random.default_rng(seed_key))
            policy = make_policy(
                spec.name,
                budget=budget,
                horizon=config.horizon,
                ctr=config.ctr,
                rng=_policy_rng(config, trial, pidx),
                **dict(spec.params),
            )
            logs = run_simulation(policy, market, budget, config.horizon, config.periods)
            ratios.append(competitive_ratio(logs, reference))
            trial_logs.append(logs)
            seeds.append("-".join(map(str, seed_key)))
        outcomes.append(PolicyOutcome(spec.name, ratios, trial_logs, seeds))
    return ExperimentResult(
        config, budget, config.horizon, config.periods, reference, "planner_value", outcomes
    )


def _run_replay(config: ExperimentConfig) -> ExperimentResult:
    sequence = load_replay(config.replay_file)
    wanted = config.periods * config.horizon
    if len(sequence) < wanted:
        logger.warning(
            "replay %s has %d auctions, fewer than periods*horizon=%d; final period truncated",
            sequence.source,
            len(sequence),
            wanted,
        )
    usable = sequence.entries[: min(len(sequence), wanted)]
    if config.budget is None:
        pmf = empirical_pmf(sequence.prices())
        cal = calibrate_budget(pmf, config.horizon, config.calibration_f, config.ctr)
        if not cal.reached:
            raise ExperimentError(
                f"calibration target unreachable on replay data; best {cal.value:.6g}"
            )
        budget = cal.budget
    else:
        budget = config.budget
    chunks = [
        usable[i : i + config.horizon] for i in range(0, len(usable), config.horizon)
    ]
    reference = float(sum(offline_optimal(chunk, budget) for chunk in chunks))
    if reference <= 0.0:
        raise ExperimentError("offline optimum is zero on this replay; nothing to compete with")

    outcomes = []
    for pidx, spec in enumerate(config.policies):
        ratios: list[float] = []
        trial_logs = []
        seeds = []
        for trial in range(config.trials):
            market = ReplayMarket(sequence)
            policy = make_policy(
                spec.name,
                budget=budget,
                horizon=config.horizon,
                ctr=config.ctr,
                rng=_policy_rng(config, trial, pidx),
                **dict(spec.params),
            )
            logs = run_simulation(policy, market, budget, config.horizon, config.periods)
            ratios.append(sum(log.clicks for log in logs) / reference)
            trial_logs.append(logs)
            seeds.append(f"replay:{sequence.source}")
        outcomes.append(PolicyOutcome(spec.name, ratios, trial_logs, seeds))
    return ExperimentResult(
        config, budget, config.horizon, config.periods, reference, "offline_optimal", outcomes
    )


def run_experiment(config: ExperimentConfig) -> ExperimentResult:
    """Run every configured policy over the configured market."""
    if config.mode == "stochastic":
        return _run_stochastic(config)
    return _run_replay(config)


def _mean_curves(trial_logs) -> list[tuple[int, float, float, float, float]]:
    """Average the per-auction curves over trials; rows are
    (auction, policy_cum, policy_norm, offline_cum, offline_norm)."""
    curves = [convergence_curve(logs) for logs in trial_logs]
    length = min(len(c) for c in curves)
    rows = []
    for i in range(length):
        policy_cum = float(np.mean([c[i].policy_clicks for c in curves]))
        offline_cum = float(np.mean([c[i].offline_clicks for c in curves]))
        auction = curves[0][i].auction
        rows.append(
            (auction, policy_cum, policy_cum / auction, offline_cum, offline_cum / auction)
        )
    return rows


def emit_reports(result: ExperimentResult, out_dir) -> list[Path]:
    """Write summary.csv, curves.csv, config.echo and ttests.csv.

    Files are UTF-8 with LF line endings and deterministic formatting, so a
    re-run with the same config and seed is byte-identical.
    """
    if not result.outcomes or not result.outcomes[0].ratios:
        raise ExperimentError("empty result; nothing to write")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []

    lines = ["policy,mean_ratio,std"]
    for po in result.outcomes:
        arr = np.asarray(po.ratios, dtype=float)
        std = float(arr.std(ddof=1)) if arr.size > 1 else 0.0
        lines.append(f"{po.name},{_fmt_value(float(arr.mean()))},{_fmt_value(std)}")
    summary = out / "summary.csv"
    summary.write_text("\n".join(lines) + "\n", encoding="utf-8")
    written.append(summary)

    lines = ["policy,period,auction,cumulative_clicks,normalized"]
    for po in result.outcomes:
        for auction, policy_cum, policy_norm, _, _ in _mean_curves(po.trial_logs):
            period = (auction - 1) // result.horizon + 1
            lines.append(
                f"{po.name},{period},{auction},{_fmt_value(policy_cum)},{_fmt_value(policy_norm)}"
            )
    # offline benchmark from the first policy's trials (identical across
    # policies in a paired run)
    for auction, _, _, off_cum, off_norm in _mean_curves(result.outcomes[0].trial_logs):
        period = (auction - 1) // result.horizon + 1
        lines.append(
            f"offline_optimal,{period},{auction},{_fmt_value(off_cum)},{_fmt_value(off_norm)}"
        )
    curves = out / "curves.csv"
    curves.write_text("\n".join(lines) + "\n", encoding="utf-8")
    written.append(curves)

    echo = out / "config.echo"
    echo.write_text(echo_config(result.config), encoding="utf-8")
    written.append(echo)

    lines = ["policy_a,policy_b,t_statistic,p_value"]
    if len(result.outcomes[0].ratios) >= 2:
        for i, left in enumerate(result.outcomes):
            for right in result.outcomes[i + 1 :]:
                t_stat, p_value = paired_ttest(left.ratios, right.ratios)
                lines.append(
                    f"{left.name},{right.name},{_fmt_value(t_stat)},{_fmt_value(p_value)}"
                )
    ttests = out / "ttests.csv"
    ttests.write_text("\n".join(lines) + "\n", encoding="utf-8")
    written.append(ttests)
    return written


def with_overrides(
    config: ExperimentConfig, seed: int | None = None, trials: int | None = None
) -> ExperimentConfig:
    """Apply command-line overrides onto a parsed config."""
    if seed is not None:
        config = replace(config, seed=seed)
    if trials is not None:
        if trials < 1:
            raise ConfigError(f"trials override must be >= 1, got {trials}")
        config = replace(config, trials=trials)
    return config
