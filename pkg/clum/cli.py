"""Command-line entry point; every subcommand prints one JSON report on stdout."""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Any, Sequence

from .approx import (
    ApproxConfig,
    CostEstimate,
    ExplicitOracle,
    OracleInterface,
    approximate_cost_with,
)
from .errors import CapacityError, ClumError, DomainError
from .exact import solution_security_price, solve_cost_compressed, solve_exact, trade_cost
from .interval_tree import IntervalOracle, IntervalTree, copy_tree, interval_security_price
from .ledger import load_ledger, save_ledger
from .market import Clause2, Indicator, Interval, MarketState, Security, materialize_shares
from .reduction import reduce_and_price
from .rng import make_rng
from .selftest import run_selftest
from .services import EngineContainer
from .twosat import count_models_brute_force, load_dimacs
from .wish import wish_price_report

logger = logging.getLogger("clum")

SELFTEST_EXIT = 4


@dataclass
class RunReport:
    command: str
    inputs: dict[str, Any] = field(default_factory=dict)
    result: dict[str, Any] = field(default_factory=dict)
    diagnostics: dict[str, Any] = field(default_factory=dict)
    seed: int | None = None
    trace: list[dict[str, float]] = field(default_factory=list, repr=False)
    exit_code: int = field(default=0, repr=False)

    def to_json(self) -> str:
        payload = asdict(self)
        payload.pop("trace")
        payload.pop("exit_code")
        return json.dumps(_finite(payload), sort_keys=True)


def _finite(value: Any) -> Any:
    if isinstance(value, float) and not math.isfinite(value):
        return None
    if isinstance(value, dict):
        return {key: _finite(item) for key, item in value.items()}
    if isinstance(value, (list, tuple)):
        return [_finite(item) for item in value]
    return value


class _Parser(argparse.ArgumentParser):
    def error(self, message: str) -> None:  # type: ignore[override]
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _add_security(parser: argparse.ArgumentParser, required: bool = True) -> None:
    group = parser.add_mutually_exclusive_group(required=required)
    group.add_argument("--interval", nargs=2, type=int, metavar=("LO", "HI"))
    group.add_argument("--indicator", type=int, metavar="J")
    group.add_argument("--clause", metavar='"A B"', help='two signed literals, e.g. "1 -2"')


def _add_approx(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--epsilon", type=float)
    parser.add_argument("--delta", type=float)
    parser.add_argument("--workers", type=int)
    parser.add_argument("--seed", type=int)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="clum", description="Constant log utility market maker pricing engine.")
    parser.add_argument("--settings", type=Path, help="JSON settings file")
    parser.add_argument("--verbose", action="store_true", help="debug logging on stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve-exact", help="exact cost of a ledger")
    p.add_argument("--ledger", type=Path, required=True)
    p.add_argument("--tol", type=float)

    p = sub.add_parser("solve-approx", help="randomised cost estimate of a ledger")
    p.add_argument("--ledger", type=Path, required=True)
    _add_approx(p)
    p.add_argument("--trace", action="store_true", help="print per-round JSON lines")

    for name in ("quote", "trade"):
        p = sub.add_parser(name, help=f"{name} a security against a ledger")
        p.add_argument("--ledger", type=Path, required=True)
        _add_security(p)
        p.add_argument("--qty", type=int, required=True)
        _add_approx(p)

    p = sub.add_parser("count-models", help="count 2-SAT models")
    p.add_argument("--dimacs", type=Path, required=True)
    p.add_argument("--via", choices=("pricing", "brute"), default="pricing")
    p.add_argument("--C0", type=float)

    p = sub.add_parser("interval", help="interval-market tree state")
    actions = p.add_subparsers(dest="action", required=True)
    for action in ("buy", "max", "quote"):
        a = actions.add_parser(action)
        a.add_argument("--state", type=Path, required=True, help="tree snapshot JSON")
        a.add_argument("--N", type=int, help="universe size when creating a new state")
        a.add_argument("--C0", type=float, help="initial subsidy stored with a new state")
        if action != "max":
            a.add_argument("--lo", type=int, required=True)
            a.add_argument("--hi", type=int, required=True)
            a.add_argument("--qty", type=int, required=True)
        if action == "quote":
            _add_approx(a)

    p = sub.add_parser("wish-price", help="hash-based clause price")
    p.add_argument("--ledger", type=Path, required=True)
    p.add_argument("--clause", required=True, metavar='"A B"')
    p.add_argument("--delta", type=float)
    p.add_argument("--alpha", "--alpha-override", dest="alpha", type=float)
    p.add_argument("--k", type=int)
    p.add_argument("--c", type=int)
    p.add_argument("--seed", type=int)

    p = sub.add_parser("settings", help="show the resolved settings")
    p.add_argument("--write", action="store_true", help="persist defaults into the --settings file")

    p = sub.add_parser("selftest", help="run the embedded invariant checks")
    p.add_argument("--seed", type=int)
    return parser


def _parse_clause(text: str) -> Clause2:
    try:
        literals = [int(tok) for tok in text.split()]
    except ValueError as exc:
        raise DomainError(f"clause {text!r} must be two signed integers") from exc
    if len(literals) != 2:
        raise DomainError(f"clause {text!r} must have exactly two literals")
    return Clause2.from_ints(*literals)


def _security(args: argparse.Namespace) -> Security:
    if args.interval is not None:
        return Interval(*args.interval)
    if args.indicator is not None:
        return Indicator(args.indicator)
    return _parse_clause(args.clause)


def _describe(security: Security) -> dict[str, Any]:
    if isinstance(security, Interval):
        return {"interval": [security.lo, security.hi]}
    if isinstance(security, Indicator):
        return {"indicator": security.outcome}
    return {"clause": str(security)}


def _seed(engine: EngineContainer, args: argparse.Namespace) -> int:
    seed = engine.resolve_seed(getattr(args, "seed", None))
    if seed < 0:
        raise DomainError(f"seed must be nonnegative, got {seed}")
    return seed


def _approx_cfg(engine: EngineContainer, args: argparse.Namespace) -> ApproxConfig:
    overrides = {
        key: getattr(args, key)
        for key in ("epsilon", "delta", "workers")
        if getattr(args, key, None) is not None
    }
    return replace(engine.approx, **overrides)


def tree_from_state(state: MarketState, seed: int = 0) -> IntervalTree:
    if not state.is_interval_market():
        raise DomainError("the interval tree only holds interval securities")
    tree = IntervalTree(state.N, seed=seed)
    for entry in state.ledger:
        if entry.quantity:
            tree.purchase(entry.security.lo, entry.security.hi, entry.quantity)
    return tree


def _oracle_for(state: MarketState, engine: EngineContainer, seed: int) -> tuple[OracleInterface, str]:
    if state.N <= engine.max_outcomes:
        return ExplicitOracle(materialize_shares(state)), "explicit"
    if state.is_interval_market():
        return IntervalOracle(tree_from_state(state, seed)), "interval-tree"
    raise CapacityError(
        f"N={state.N} exceeds {engine.max_outcomes} and the ledger is not an interval market"
    )


def _estimate_fields(estimate: CostEstimate) -> dict[str, Any]:
    return {
        "iterations": estimate.iterations,
        "terminated_early": estimate.terminated_early,
        "bracket": list(estimate.bracket),
        "samples": estimate.samples,
    }


def cmd_solve_exact(args, engine: EngineContainer) -> RunReport:
    state = load_ledger(args.ledger)
    cfg = replace(engine.solve, abs_tol=args.tol) if args.tol is not None else engine.solve
    solution = solve_exact(materialize_shares(state, engine.max_outcomes), state.C0, cfg)
    return RunReport(
        "solve-exact",
        inputs={"ledger": str(args.ledger), "tol": cfg.abs_tol},
        result={"cost": solution.cost},
        diagnostics={
            "residual": solution.residual,
            "iterations": solution.iterations,
            "q_max": solution.q_max,
            "log_offset": solution.log_offset,
        },
    )


def cmd_solve_approx(args, engine: EngineContainer) -> RunReport:
    state = load_ledger(args.ledger)
    seed = _seed(engine, args)
    cfg = _approx_cfg(engine, args)
    oracle, path = _oracle_for(state, engine, seed)
    estimate = approximate_cost_with(state.C0, oracle, cfg, make_rng(seed))
    stats = oracle.max_stats()
    return RunReport(
        "solve-approx",
        inputs={"ledger": str(args.ledger), "epsilon": cfg.epsilon, "delta": cfg.delta},
        result={"cost": estimate.c_hat, "bracket": list(estimate.bracket)},
        diagnostics={**_estimate_fields(estimate), "path": path, "q_max": stats.q_max, "s_qmax": stats.s_qmax},
        seed=seed,
        trace=[round_.as_dict() for round_ in estimate.trace] if args.trace else [],
    )


def _quote(args, engine: EngineContainer) -> tuple[RunReport, MarketState, Security]:
    state = load_ledger(args.ledger)
    security = _security(args)
    if args.qty < 0:
        raise DomainError(f"qty must be nonnegative, got {args.qty}")
    after = state.with_purchase(security, args.qty)
    inputs = {"ledger": str(args.ledger), "qty": args.qty, **_describe(security)}

    if state.N <= engine.max_outcomes:
        cost = trade_cost(state, security, args.qty, engine.solve, engine.max_outcomes)
        q = materialize_shares(after)
        solution = solve_exact(q, state.C0, engine.solve)
        report = RunReport(
            args.command,
            inputs=inputs,
            result={"cost": cost, "price_after": solution_security_price(q, solution, security)},
            diagnostics={"path": "exact", "cost_after": solution.cost},
        )
        return report, after, security

    if not (after.is_interval_market() and isinstance(security, Interval)):
        raise CapacityError(f"N={state.N} needs an interval ledger for approximate quoting")
    seed = _seed(engine, args)
    cfg = _approx_cfg(engine, args)
    before_tree = tree_from_state(state, seed)
    after_tree = tree_from_state(after, seed)
    before = approximate_cost_with(state.C0, IntervalOracle(before_tree), cfg, make_rng(seed, 0))
    later = approximate_cost_with(state.C0, IntervalOracle(after_tree), cfg, make_rng(seed, 1))
    report = RunReport(
        args.command,
        inputs={**inputs, "epsilon": cfg.epsilon, "delta": cfg.delta},
        result={
            "cost": later.c_hat - before.c_hat,
            "price_after": interval_security_price(after_tree, later.c_hat, security.lo, security.hi),
        },
        diagnostics={
            "path": "interval-tree+approx",
            "before": _estimate_fields(before),
            "after": _estimate_fields(later),
            "k": after_tree.node_count,
        },
        seed=seed,
    )
    return report, after, security


def cmd_quote(args, engine: EngineContainer) -> RunReport:
    return _quote(args, engine)[0]


def cmd_trade(args, engine: EngineContainer) -> RunReport:
    report, after, _ = _quote(args, engine)
    save_ledger(after, args.ledger)
    report.diagnostics["ledger_entries"] = len(after.ledger)
    return report


def cmd_count_models(args, engine: EngineContainer) -> RunReport:
    formula = load_dimacs(args.dimacs)
    inputs = {"dimacs": str(args.dimacs), "via": args.via, "n": formula.n, "k": formula.k}
    if args.via == "brute":
        count = count_models_brute_force(formula, engine.brute_force_max_events)
        return RunReport("count-models", inputs=inputs, result={"count": count})
    C0 = args.C0 if args.C0 is not None else engine.reduction_C0
    report = reduce_and_price(
        formula, C0, engine.solve, engine.reduction_max_events, engine.precision_guard
    )
    return RunReport(
        "count-models",
        inputs={**inputs, "C0": C0},
        result={"count": report.count},
        diagnostics={
            "inverse_price": report.inverse_price,
            "slack": report.slack,
            "q": report.q,
            "cost": report.cost,
            "subsidy_margin": report.subsidy_margin,
            "tolerance": report.tolerance,
        },
    )


def _load_tree(args, seed: int) -> tuple[IntervalTree, float]:
    if args.state.exists():
        tree, C0 = IntervalTree.load(args.state, seed=seed)
        return tree, C0 if C0 is not None else (args.C0 or 1.0)
    if args.N is None:
        raise DomainError(f"{args.state} does not exist; pass --N to create it")
    return IntervalTree(args.N, seed=seed), args.C0 if args.C0 is not None else 1.0


def cmd_interval(args, engine: EngineContainer) -> RunReport:
    seed = _seed(engine, args)
    tree, C0 = _load_tree(args, seed)
    inputs: dict[str, Any] = {"state": str(args.state), "action": args.action}

    if args.action == "max":
        stats = tree.query_max()
        return RunReport(
            "interval",
            inputs=inputs,
            result={"q_max": stats.q_max, "s_qmax": stats.s_qmax},
            diagnostics={"k": tree.node_count, "height": tree.height, "purchases": tree.purchase_count},
        )

    inputs.update({"lo": args.lo, "hi": args.hi, "qty": args.qty})
    if args.action == "buy":
        before_ops = tree.op_count
        tree.purchase(args.lo, args.hi, args.qty)
        tree.save(args.state, C0)
        stats = tree.query_max()
        return RunReport(
            "interval",
            inputs=inputs,
            result={"q_max": stats.q_max, "s_qmax": stats.s_qmax},
            diagnostics={
                "k": tree.node_count,
                "height": tree.height,
                "purchases": tree.purchase_count,
                "nodes_touched": tree.op_count - before_ops,
            },
        )

    cfg = _approx_cfg(engine, args)
    after = copy_tree(tree, seed)
    after.purchase(args.lo, args.hi, args.qty)
    before_oracle, after_oracle = IntervalOracle(tree), IntervalOracle(after)
    before = approximate_cost_with(C0, before_oracle, cfg, make_rng(seed, 0))
    later = approximate_cost_with(C0, after_oracle, cfg, make_rng(seed, 1))
    exact_before = solve_cost_compressed(*before_oracle.compressed(), C0, engine.solve).cost
    exact_after = solve_cost_compressed(*after_oracle.compressed(), C0, engine.solve).cost
    return RunReport(
        "interval",
        inputs={**inputs, "epsilon": cfg.epsilon, "delta": cfg.delta},
        result={"cost": later.c_hat - before.c_hat},
        diagnostics={
            "path": "interval-tree+approx",
            "before": _estimate_fields(before),
            "after": _estimate_fields(later),
            "exact_cost": exact_after - exact_before,
        },
        seed=seed,
    )


def cmd_wish_price(args, engine: EngineContainer) -> RunReport:
    state = load_ledger(args.ledger)
    seed = _seed(engine, args)
    overrides = {key: getattr(args, key) for key in ("delta", "alpha", "k", "c") if getattr(args, key) is not None}
    cfg = replace(engine.wish, **overrides)
    clause = _parse_clause(args.clause)
    estimate = wish_price_report(state, clause, cfg, seed, engine.solve)
    diagnostics = estimate.as_dict()
    price = diagnostics.pop("price")
    diagnostics["weakened"] = cfg.weakened
    return RunReport(
        "wish-price",
        inputs={"ledger": str(args.ledger), "clause": str(clause), "delta": cfg.delta,
                "alpha": cfg.alpha, "k": cfg.k, "c": cfg.c},
        result={"price": price},
        diagnostics=diagnostics,
        seed=seed,
    )


def cmd_selftest(args, engine: EngineContainer) -> RunReport:
    seed = _seed(engine, args)
    results = run_selftest(seed)
    passed = all(step.ok for step in results)
    return RunReport(
        "selftest",
        result={"passed": passed},
        diagnostics={"steps": [step.as_dict() for step in results]},
        seed=seed,
        exit_code=0 if passed else SELFTEST_EXIT,
    )



def cmd_settings(args, engine: EngineContainer) -> RunReport:
    store = engine.settings
    sections = store.fill_defaults()
    if args.write:
        if store.settings_file is None:
            raise DomainError("--write needs a --settings file")
        store.save()
        logger.debug("wrote settings to %s", store.settings_file)
    path = str(store.settings_file) if store.settings_file is not None else None
    return RunReport("settings", inputs={"settings": path, "write": args.write}, result=sections)

COMMANDS = {
    "solve-exact": cmd_solve_exact,
    "solve-approx": cmd_solve_approx,
    "quote": cmd_quote,
    "trade": cmd_trade,
    "count-models": cmd_count_models,
    "interval": cmd_interval,
    "wish-price": cmd_wish_price,
    "selftest": cmd_selftest,
    "settings": cmd_settings,
}


def configure_logging(verbose: bool) -> None:
    logging.basicConfig(
        level=logging.DEBUG if verbose else logging.WARNING,
        stream=sys.stderr,
        format="%(levelname)s %(name)s: %(message)s",
        force=True,
    )


def dispatch(argv: Sequence[str] | None = None) -> RunReport:
    args = build_parser().parse_args(argv)
    configure_logging(args.verbose)
    engine = EngineContainer(args.settings)
    logger.debug("running %s", args.command)
    return COMMANDS[args.command](args, engine)


def main(argv: Sequence[str] | None = None) -> int:
    try:
        report = dispatch(argv)
    except ClumError as exc:
        print(f"clum: {type(exc).__name__}: {exc}", file=sys.stderr)
        return exc.exit_code
    for line in report.trace:
        print(json.dumps(line, sort_keys=True))
    print(report.to_json())
    return report.exit_code


if __name__ == "__main__":
    raise SystemExit(main())
