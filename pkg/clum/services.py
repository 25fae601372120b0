from __future__ import annotations

import logging
import os
from pathlib import Path
from typing import Any, Dict

from .approx import ApproxConfig
from .errors import DomainError
from .exact import SolveConfig
from .settings import SettingsStore
from .wish import WishConfig

logger = logging.getLogger(__name__)

SEED_ENV = "CLUM_SEED"


class EngineContainer:
    """Typed solver configuration built once from a settings file.

    Configs are plain attributes (``container.solve``, ``container.approx``)
    and are also reachable by name through ``as_dict``.
    """

    def __init__(self, settings_file: Path | None = None):
        self.settings = SettingsStore(settings_file)
        get = self.settings.get_number
        self.solve = SolveConfig(get("exact", "abs_tol"), get("exact", "max_iter", int))
        self.max_outcomes = get("exact", "max_outcomes", int)
        self.reduction_C0 = get("reduction", "C0")
        self.reduction_max_events = get("reduction", "max_events", int)
        self.precision_guard = get("reduction", "precision_guard")
        self.brute_force_max_events = get("brute_force", "max_events", int)
        try:
            self.approx = ApproxConfig(
                epsilon=get("approx", "epsilon"),
                delta=get("approx", "delta"),
                workers=get("approx", "workers", int),
                rejection_factor=get("approx", "rejection_factor", int),
                max_draws=get("approx", "max_draws", int),
            )
        except DomainError as exc:
            logger.warning("approx settings rejected (%s); using defaults", exc)
            self.approx = ApproxConfig()
        try:
            self.wish = WishConfig(
                delta=self.approx.delta,
                alpha=get("wish", "alpha"),
                c=get("wish", "c", int),
                k=get("wish", "k", int),
                max_events=get("wish", "max_events", int),
            )
        except DomainError as exc:
            logger.warning("wish settings rejected (%s); using defaults", exc)
            self.wish = WishConfig(delta=self.approx.delta)
        self.default_seed = get("run", "seed", int)

    def resolve_seed(self, cli_seed: int | None = None) -> int:
        """``--seed`` first, then ``CLUM_SEED``, then the ``run.seed`` setting."""
        if cli_seed is not None:
            return int(cli_seed)
        raw = os.environ.get(SEED_ENV)
        if raw is not None and raw.strip():
            try:
                return int(raw)
            except ValueError as exc:
                raise DomainError(f"{SEED_ENV}={raw!r} is not an integer") from exc
        return self.default_seed

    def as_dict(self) -> Dict[str, Any]:
        return {
            "settings": self.settings,
            "solve": self.solve,
            "max_outcomes": self.max_outcomes,
            "reduction_C0": self.reduction_C0,
            "reduction_max_events": self.reduction_max_events,
            "precision_guard": self.precision_guard,
            "brute_force_max_events": self.brute_force_max_events,
            "approx": self.approx,
            "wish": self.wish,
            "seed": self.default_seed,
        }
