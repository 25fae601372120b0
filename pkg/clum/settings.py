from __future__ import annotations

import json
import logging
from pathlib import Path
from typing import Any

logger = logging.getLogger(__name__)

DEFAULTS: dict[str, dict[str, Any]] = {
    "exact": {"abs_tol": 1e-12, "max_iter": 200, "max_outcomes": 2**20},
    "reduction": {"C0": 1.0, "max_events": 16, "precision_guard": 1e-6},
    "brute_force": {"max_events": 24},
    "approx": {
        "epsilon": 0.05,
        "delta": 0.05,
        "workers": 1,
        "rejection_factor": 64,
        "max_draws": 2**27,
    },
    "wish": {"c": 2, "k": 12, "alpha": 0.000762, "max_events": 20},
    "run": {"seed": 0},
}


class SettingsStore:
    """JSON document of named sections.

    Without a file the store lives in memory only; ``save`` is then a no-op.
    """

    def __init__(self, settings_file: Path | None = None):
        self.settings_file = Path(settings_file) if settings_file is not None else None
        self.data: dict[str, Any] = {}
        self.load()

    def load(self) -> None:
        if self.settings_file is None or not self.settings_file.exists():
            self.data = {}
            return
        try:
            self.data = json.loads(self.settings_file.read_text(encoding="utf-8"))
            if not isinstance(self.data, dict):
                logger.warning("ignoring non-object settings file %s", self.settings_file)
                self.data = {}
        except (OSError, ValueError) as exc:
            logger.warning("ignoring unreadable settings file %s: %s", self.settings_file, exc)
            self.data = {}

    def save(self) -> None:
        if self.settings_file is None:
            return
        self.settings_file.parent.mkdir(parents=True, exist_ok=True)
        self.settings_file.write_text(
            json.dumps(self.data, indent=2, ensure_ascii=True) + "\n",
            encoding="utf-8",
        )

    def fill_defaults(self) -> dict[str, Any]:
        """Add every missing default section and key; existing values are kept."""
        for name, defaults in DEFAULTS.items():
            section = self.get_section(name)
            for key, value in defaults.items():
                section.setdefault(key, value)
        return self.data

    def get_section(self, key: str, default: dict[str, Any] | None = None) -> dict[str, Any]:
        value = self.data.get(key)
        if not isinstance(value, dict):
            value = dict(default if default is not None else DEFAULTS.get(key, {}))
            self.data[key] = value
        return value

    def get_number(self, section: str, key: str, kind: type = float) -> Any:
        """Read a numeric setting, falling back to the default when invalid."""
        fallback = DEFAULTS[section][key]
        raw = self.get_section(section).get(key, fallback)
        if isinstance(raw, bool):
            raw = fallback
        try:
            value = kind(raw)
        except (TypeError, ValueError):
            logger.warning("invalid %s.%s=%r; using %r", section, key, raw, fallback)
            return kind(fallback)
        if value <= 0 and key != "seed":
            logger.warning("non-positive %s.%s=%r; using %r", section, key, raw, fallback)
            return kind(fallback)
        return value
