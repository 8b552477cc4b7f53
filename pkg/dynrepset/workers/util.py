from __future__ import annotations

import json
import logging
from datetime import datetime
from pathlib import Path
from typing import Any, Dict, Optional

from platformdirs import user_config_dir, user_log_dir
from rich.console import Console
from rich.logging import RichHandler

from dynrepset.core.pseudorandom import FamilyCache


APP_NAME = "dynrepset"
CONFIG_FILE = Path(user_config_dir(APP_NAME)) / "settings.json"
LOG_DIR = Path(user_log_dir(APP_NAME))
LOG_FILE = LOG_DIR / "runs.jsonl"
DEFAULT_CACHE_DIR = Path(".dynrepset-cache")

# Keys the settings file may override, with the type each value is coerced to.
SETTING_TYPES = {
    "threads": int,
    "cache_dir": str,
    "budget": int,
    "track_budget": int,
    "max_columns": int,
    "samples": int,
    "seed": int,
    "run_log": bool,
}


def setup_logging(verbosity: int) -> None:
    level = logging.WARNING if verbosity <= 0 else logging.INFO if verbosity == 1 else logging.DEBUG
    handler = RichHandler(console=Console(stderr=True), show_path=False, show_time=False)
    logging.basicConfig(level=level, format="%(message)s", handlers=[handler], force=True)


def make_console(file=None) -> Console:
    """Plain line-oriented stdout: no markup, no highlighting, no wrapping."""
    return Console(file=file, markup=False, highlight=False, soft_wrap=True, emoji=False)


def coerce_setting(key: str, text: str) -> Any:
    kind = SETTING_TYPES.get(key)
    if kind is None:
        raise KeyError(key)
    if kind is bool:
        lowered = text.strip().lower()
        if lowered not in ("1", "0", "true", "false", "yes", "no", "on", "off"):
            raise ValueError(f"{key} expects a boolean, got {text!r}")
        return lowered in ("1", "true", "yes", "on")
    return kind(text)


def load_settings(path: Optional[Path] = None) -> Dict[str, Any]:
    path = path or CONFIG_FILE
    try:
        if path.exists():
            data = json.loads(path.read_text())
            return {k: v for k, v in data.items() if k in SETTING_TYPES}
    except Exception:
        logging.getLogger(__name__).warning("ignoring unreadable settings file %s", path)
    return {}


def save_settings(settings: Dict[str, Any], path: Optional[Path] = None) -> bool:
    path = path or CONFIG_FILE
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        data: Dict[str, Any] = {}
        if path.exists():
            try:
                data = json.loads(path.read_text())
            except Exception:
                data = {}
        data.update(settings)
        path.write_text(json.dumps(data, indent=2, sort_keys=True))
        return True
    except Exception:
        logging.getLogger(__name__).warning("cannot write settings file %s", path)
        return False


def family_cache(cache_dir: Optional[Path], enabled: bool = True) -> Optional[FamilyCache]:
    if not enabled:
        return None
    return FamilyCache(cache_dir or DEFAULT_CACHE_DIR)


def append_run_log(command: str, params: Dict[str, Any], outcome: str, elapsed_ms: float,
                   path: Optional[Path] = None) -> None:
    path = path or LOG_FILE
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        entry = {
            "timestamp": datetime.now().isoformat(timespec="seconds"),
            "command": command,
            "params": {k: str(v) if isinstance(v, Path) else v for k, v in params.items()},
            "outcome": outcome,
            "elapsed_ms": round(elapsed_ms, 1),
        }
        with path.open("a", encoding="utf-8") as f:
            f.write(json.dumps(entry) + "\n")
    except Exception:
        pass
