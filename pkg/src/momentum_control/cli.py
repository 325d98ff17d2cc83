"""Command-line scenario runner.

Subcommands ``simulate``, ``region``, ``control`` and ``game`` read an
optional flat YAML config (``--config``) and command-line overrides, and
write CSV or JSON to ``--out`` or stdout.

Config keys (all optional)::

    lambda, mu, beta, p0, horizon, tol
    control: null | quick_response | sigma
    phi: [a, b, c]  or  "a,b,c"      (quick_response poles, complex allowed)
    sigma: [s1, s2, s3]             (explicit gain)
    trigger_tol
    profile: none | all_buy_sell | [x1, x2, ...]
    lambda_range, mu_range: [lo, hi]; steps
    exhaustive: true | false        (game: enumerate open-loop profiles)
    out

Exit codes: 0 success, 2 config error, 3 numeric overflow, 4 internal
invariant violation.
"""

from __future__ import annotations

import argparse
import math
import sys
from dataclasses import dataclass

import yaml

from . import control as ctl
from . import game, viability
from ._fmt import dumps
from .dynamics import NULL_CONTROL, MarketParams, PricingRule, invariant_residual, simulate

EXIT_OK, EXIT_CONFIG, EXIT_OVERFLOW, EXIT_INVARIANT = 0, 2, 3, 4
OVERFLOW_LIMIT = 1e15
INVARIANT_TOL = 1e-9

KNOWN_KEYS = {
    "lambda", "mu", "beta", "p0", "horizon", "tol", "control", "phi", "sigma",
    "trigger_tol", "profile", "lambda_range", "mu_range", "steps", "exhaustive", "out",
}


class ConfigError(Exception):
    pass


class OverflowDetected(Exception):
    pass


class InvariantViolation(Exception):
    pass


@dataclass
class ScenarioConfig:
    lam: float = 1.0
    mu: float = 1.0
    beta: float = 0.0
    p0: float = 0.0
    horizon: int = 20
    tol: float = 1e-9
    control: str = "null"
    phi: tuple = game.THIRDS_POLES
    sigma: tuple | None = None
    trigger_tol: float = 1e-9
    profile: object = "none"
    lambda_range: tuple = (0.0, 3.0)
    mu_range: tuple = (0.0, 3.0)
    steps: int = 300
    exhaustive: bool = False
    out: str | None = None

    def rule(self) -> PricingRule:
        return PricingRule(self.lam, self.mu)

    def market(self) -> MarketParams:
        return MarketParams(beta=self.beta, p0=self.p0, horizon=self.horizon, tol=self.tol)

    def actions(self) -> list[int]:
        if self.profile == "none":
            return [0] * self.horizon
        if self.profile == "all_buy_sell":
            return [1] * self.horizon
        return list(self.profile)

    def gain(self):
        if self.control == "quick_response":
            return ctl.pole_place(self.rule(), self.beta, self.phi)
        if self.control == "sigma":
            return ctl.gain_from_sigma(self.rule(), self.beta, self.sigma)
        return None

    def policy(self):
        g = self.gain()
        return NULL_CONTROL if g is None else ctl.quick_response_control(g, self.trigger_tol)


def _number(name, v) -> float:
    if isinstance(v, bool):
        raise ConfigError(f"{name}: expected a number, got {v!r}")
    try:
        x = float(v)
    except (TypeError, ValueError):
        raise ConfigError(f"{name}: expected a number, got {v!r}") from None
    if not math.isfinite(x):
        raise ConfigError(f"{name}: must be finite")
    return x


def _integer(name, v) -> int:
    x = _number(name, v)
    if x != int(x):
        raise ConfigError(f"{name}: expected an integer, got {v!r}")
    return int(x)


def _pair(name, v) -> tuple[float, float]:
    if isinstance(v, str):
        v = v.split(",")
    if not isinstance(v, (list, tuple)) or len(v) != 2:
        raise ConfigError(f"{name}: expected [lo, hi]")
    return (_number(name, v[0]), _number(name, v[1]))


def _complex_list(name, v) -> tuple:
    if isinstance(v, str):
        v = [s.strip() for s in v.split(",")]
    if not isinstance(v, (list, tuple)):
        raise ConfigError(f"{name}: expected a list")
    out = []
    for item in v:
        try:
            if isinstance(item, (list, tuple)):
                out.append(complex(float(item[0]), float(item[1])))
            else:
                out.append(complex(str(item).replace(" ", "")))
        except (TypeError, ValueError, IndexError):
            raise ConfigError(f"{name}: cannot parse {item!r}") from None
    return tuple(out)


def _profile(v):
    if v in ("none", "all_buy_sell"):
        return v
    if isinstance(v, str):
        v = [s.strip() for s in v.split(",") if s.strip()]
    if not isinstance(v, (list, tuple)):
        raise ConfigError(f"profile: unknown profile {v!r}")
    actions = [_integer("profile", x) for x in v]
    if any(a not in game.ACTIONS for a in actions):
        raise ConfigError("profile: actions must be -1, 0 or 1")
    return actions


def build_config(raw: dict) -> ScenarioConfig:
    unknown = set(raw) - KNOWN_KEYS
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(sorted(unknown))}")
    cfg = ScenarioConfig()
    for key, attr in (("lambda", "lam"), ("mu", "mu"), ("beta", "beta"), ("p0", "p0"),
                      ("tol", "tol"), ("trigger_tol", "trigger_tol")):
        if raw.get(key) is not None:
            setattr(cfg, attr, _number(key, raw[key]))
    for key in ("horizon", "steps"):
        if raw.get(key) is not None:
            setattr(cfg, key, _integer(key, raw[key]))
    if raw.get("control") is not None:
        c = str(raw["control"]).lower()
        if c not in ("null", "none", "quick_response", "sigma"):
            raise ConfigError(f"control: unknown control {raw['control']!r}")
        cfg.control = "null" if c == "none" else c
    if raw.get("phi") is not None:
        cfg.phi = _complex_list("phi", raw["phi"])
    if raw.get("sigma") is not None:
        cfg.sigma = tuple(_number("sigma", s) for s in raw["sigma"])
    if raw.get("profile") is not None:
        cfg.profile = _profile(raw["profile"])
    for key in ("lambda_range", "mu_range"):
        if raw.get(key) is not None:
            setattr(cfg, key, _pair(key, raw[key]))
    if raw.get("exhaustive") is not None:
        if not isinstance(raw["exhaustive"], bool):
            raise ConfigError("exhaustive: expected true or false")
        cfg.exhaustive = raw["exhaustive"]
    if raw.get("out") is not None:
        cfg.out = str(raw["out"])
    validate(cfg)
    return cfg


def validate(cfg: ScenarioConfig):
    try:
        cfg.rule()
        cfg.market()
        if cfg.control == "sigma" and (cfg.sigma is None or len(cfg.sigma) != 3):
            raise ConfigError("control 'sigma' needs a three-entry sigma")
        if cfg.control == "quick_response" and len(cfg.phi) != 3:
            raise ConfigError("phi needs three eigenvalues")
        if cfg.control != "null":
            cfg.policy()
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    if isinstance(cfg.profile, list) and len(cfg.profile) > cfg.horizon:
        raise ConfigError(f"profile has {len(cfg.profile)} actions, more than horizon {cfg.horizon}")


def load_config(path: str | None, overrides: dict) -> ScenarioConfig:
    raw = {}
    if path:
        try:
            with open(path, encoding="utf-8") as fh:
                raw = yaml.safe_load(fh) or {}
        except OSError as exc:
            raise ConfigError(f"cannot read config: {exc}") from None
        except yaml.YAMLError as exc:
            raise ConfigError(f"malformed config: {exc}") from None
        if not isinstance(raw, dict):
            raise ConfigError("config must be a flat key-value mapping")
        nested = [k for k, v in raw.items() if isinstance(v, dict)]
        if nested:
            raise ConfigError(f"nested sections are not allowed: {', '.join(map(str, nested))}")
    raw.update({k: v for k, v in overrides.items() if v is not None})
    # --phi alone implies pole placement
    if overrides.get("phi") is not None and overrides.get("control") is None:
        if raw.get("control") in (None, "null", "none"):
            raw["control"] = "quick_response"
    return build_config(raw)


def _check_overflow(values):
    for v in values:
        if abs(float(v)) > OVERFLOW_LIMIT:
            raise OverflowDetected(f"value {float(v):g} exceeds {OVERFLOW_LIMIT:g}")


def run_simulate(cfg: ScenarioConfig) -> str:
    ys = game.profile_orders(cfg.actions())[: cfg.horizon]
    try:
        traj = simulate(cfg.market(), cfg.rule(), ys, cfg.policy())
    except FloatingPointError as exc:
        raise OverflowDetected(str(exc)) from None
    for r in traj.records:
        _check_overflow((r.quote, r.y, r.xi, r.u, r.q, r.p))
    if invariant_residual(traj) > INVARIANT_TOL:
        raise InvariantViolation("trajectory violates the price recursion")
    return traj.to_csv()


def run_region(cfg: ScenarioConfig) -> str:
    try:
        grid = viability.region_grid(cfg.beta, cfg.lambda_range, cfg.mu_range, cfg.steps)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    if any(c.in_M3 and not c.in_M1 for c in grid.cells):
        raise InvariantViolation("M3 cell outside M1")
    return grid.to_csv()


def run_control_report(cfg: ScenarioConfig) -> str:
    gain = cfg.gain()
    report = ctl.control_report(cfg.rule(), cfg.beta, gain)
    if abs(report["detW"] - cfg.lam) > 1e-9 * cfg.lam:
        raise InvariantViolation(f"det(W)={report['detW']} differs from lambda={cfg.lam}")
    if gain is not None and report["char_poly_residual"] > 1e-8 * max(1.0, *map(abs, gain.delta)):
        raise InvariantViolation("closed-loop polynomial does not match the requested poles")
    _check_overflow([x for row in report["W"] for x in row])
    return dumps(report)


def run_game_check(cfg: ScenarioConfig) -> str:
    rule = cfg.rule()
    label = viability.classify(cfg.lam, cfg.mu, cfg.beta)
    out = {
        "lambda": cfg.lam,
        "mu": cfg.mu,
        "beta": cfg.beta,
        "regions": {
            "R": label.values.R, "D": label.values.D, "L": label.values.L,
            "in_M": label.in_M, "in_M1": label.in_M1, "in_M2": label.in_M2,
            "in_M3": label.in_M3, "on_kyle": label.on_kyle_line,
        },
        "lone_deviation": {
            "closed_form": game.prop2_deviation_payoff(rule, cfg.beta),
            "simulation": game.lone_deviation_simulated(rule, cfg.beta),
        },
        "gamma1_no_control": [c.as_dict() for c in game.subgame_table_no_control(rule, cfg.beta)],
        "sufficiency": game.spe_viability_sufficiency_check(rule, cfg.beta).as_dict(),
    }
    policy = cfg.policy()
    p0 = game.P0_CONTROLLED if cfg.control != "null" else game.P0_SYMMETRIC
    actions = cfg.actions()
    out["ne_report"] = game.ne_check_open_loop(rule, cfg.beta, policy, actions, p0=p0).as_dict()
    if cfg.exhaustive:
        if cfg.horizon > game.EXHAUSTIVE_MAX_HORIZON:
            raise ConfigError(f"exhaustive search needs horizon <= {game.EXHAUSTIVE_MAX_HORIZON}")
        eq = game.find_open_loop_equilibria(rule, cfg.beta, policy, cfg.horizon, p0=p0)
        out["open_loop_equilibria"] = [list(e) for e in eq]
    if cfg.control == "quick_response":
        if viability.in_maximal_set(cfg.lam, cfg.mu):
            table = game.theorem1_payoff_cases(rule, cfg.beta)
            worst = max(c.max_abs_error for c in table.cells)
            if worst > 1e-9 * max(1.0, cfg.lam, cfg.mu * max(1.0, cfg.beta)):
                raise InvariantViolation("quick-response closed forms disagree with simulation")
            out["quick_response_cases"] = table.as_dict()
        else:
            out["impossibility_witness"] = game.theorem1_impossibility_witness(rule, cfg.beta).as_dict()
    return dumps(out)


COMMANDS = {
    "simulate": run_simulate,
    "region": run_region,
    "control": run_control_report,
    "game": run_game_check,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="momentum-control", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config")
        p.add_argument("--out")
        p.add_argument("--beta", type=float)
        p.add_argument("--lambda", dest="lambda_", type=float)
        p.add_argument("--mu", type=float)
        p.add_argument("--horizon", type=int)
        p.add_argument("--phi", help="comma-separated poles, e.g. 0.5,0.2+0.1j,0.2-0.1j")
        p.add_argument("--profile", help="none, all_buy_sell, or comma-separated actions")
        p.add_argument("--control", choices=["null", "quick_response", "sigma"])
        p.add_argument("--lambda-range", dest="lambda_range")
        p.add_argument("--mu-range", dest="mu_range")
        p.add_argument("--steps", type=int)
        p.add_argument("--exhaustive", action="store_true", default=None)
    return parser


def _write(text: str, path: str | None):
    if path is None:
        sys.stdout.write(text)
        return
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    overrides = {
        "beta": args.beta, "lambda": args.lambda_, "mu": args.mu, "horizon": args.horizon,
        "phi": args.phi, "profile": args.profile, "control": args.control,
        "lambda_range": args.lambda_range, "mu_range": args.mu_range, "steps": args.steps,
        "exhaustive": args.exhaustive, "out": args.out,
    }
    try:
        cfg = load_config(args.config, overrides)
        text = COMMANDS[args.command](cfg)
        _write(text, cfg.out)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OverflowDetected as exc:
        print(f"numeric overflow: {exc}", file=sys.stderr)
        return EXIT_OVERFLOW
    except InvariantViolation as exc:
        print(f"invariant violation: {exc}", file=sys.stderr)
        return EXIT_INVARIANT
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
