from __future__ import annotations

import json
from pathlib import Path
from typing import Any

from .errors import DomainError
from .market import Clause2, EventLiteral, Indicator, Interval, MarketState, Security

_TOP_LEVEL = {"C0", "n_events", "N", "securities"}
_FIELDS = {
    "clause2": {"type", "lits", "qty"},
    "indicator": {"type", "outcome", "qty"},
    "interval": {"type", "lo", "hi", "qty"},
}


def _int(value: Any, what: str) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise DomainError(f"{what} must be an integer, got {value!r}")
    return value


def _number(value: Any, what: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise DomainError(f"{what} must be a number, got {value!r}")
    return float(value)


def _literal(raw: Any) -> EventLiteral:
    if not isinstance(raw, list) or len(raw) != 2 or not isinstance(raw[1], bool):
        raise DomainError(f"literal must be [event, polarity], got {raw!r}")
    return EventLiteral(_int(raw[0], "literal event"), raw[1])


def parse_security(raw: Any) -> tuple[Security, int]:
    if not isinstance(raw, dict):
        raise DomainError(f"security must be an object, got {raw!r}")
    kind = raw.get("type")
    if kind not in _FIELDS:
        raise DomainError(f"unknown security type {kind!r}")
    unknown = set(raw) - _FIELDS[kind]
    missing = _FIELDS[kind] - set(raw)
    if unknown:
        raise DomainError(f"unknown fields for {kind}: {sorted(unknown)}")
    if missing:
        raise DomainError(f"missing fields for {kind}: {sorted(missing)}")

    qty = _int(raw["qty"], "qty")
    if kind == "clause2":
        lits = raw["lits"]
        if not isinstance(lits, list) or len(lits) != 2:
            raise DomainError(f"clause2 needs exactly two literals, got {lits!r}")
        return Clause2(_literal(lits[0]), _literal(lits[1])), qty
    if kind == "indicator":
        return Indicator(_int(raw["outcome"], "outcome")), qty
    return Interval(_int(raw["lo"], "lo"), _int(raw["hi"], "hi")), qty


def security_to_json(security: Security, qty: int) -> dict[str, Any]:
    if isinstance(security, Clause2):
        lits = [[lit.event, lit.positive] for lit in (security.first, security.second)]
        return {"type": "clause2", "lits": lits, "qty": qty}
    if isinstance(security, Indicator):
        return {"type": "indicator", "outcome": security.outcome, "qty": qty}
    return {"type": "interval", "lo": security.lo, "hi": security.hi, "qty": qty}


def state_from_json(payload: Any) -> MarketState:
    if not isinstance(payload, dict):
        raise DomainError("ledger document must be a JSON object")
    unknown = set(payload) - _TOP_LEVEL
    if unknown:
        raise DomainError(f"unknown ledger fields: {sorted(unknown)}")
    for key in ("C0", "N"):
        if key not in payload:
            raise DomainError(f"ledger is missing {key!r}")

    n_events = payload.get("n_events")
    if n_events is not None:
        n_events = _int(n_events, "n_events")
    state = MarketState(
        C0=_number(payload["C0"], "C0"),
        N=_int(payload["N"], "N"),
        n_events=n_events,
    )
    securities = payload.get("securities", [])
    if not isinstance(securities, list):
        raise DomainError("securities must be a list")
    for raw in securities:
        security, qty = parse_security(raw)
        state.buy(security, qty)
    return state


def state_to_json(state: MarketState) -> dict[str, Any]:
    return {
        "C0": state.C0,
        "n_events": state.n_events,
        "N": state.N,
        "securities": [security_to_json(e.security, e.quantity) for e in state.ledger],
    }


def load_ledger(path: Path) -> MarketState:
    try:
        payload = json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise DomainError(f"cannot read ledger {path}: {exc}") from exc
    except ValueError as exc:
        raise DomainError(f"ledger {path} is not valid JSON: {exc}") from exc
    return state_from_json(payload)


def save_ledger(state: MarketState, path: Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_text(json.dumps(state_to_json(state), indent=2) + "\n", encoding="utf-8")
    tmp.replace(path)
