"""Versioned store of calibrated constants.

The registry is a JSON document with a ``kernels`` table (tabulated kernel
norms and tails) and a list of ``constants`` entries keyed by
(section, d, p). An entry with ``p = "*"`` applies to every exponent.
The environment variable ``SPARSENS_REGISTRY`` points at an alternative file.
"""

from __future__ import annotations

import hashlib
import json
import math
import os
from importlib import resources
from pathlib import Path

from .errors import CalibrationError, ConfigError
from .spectral_core import format_exponent, parse_exponent

REGISTRY_ENV = "SPARSENS_REGISTRY"

_CACHE: dict = {}


def default_path() -> Path:
    env = os.environ.get(REGISTRY_ENV)
    if env:
        return Path(env)
    return Path(str(resources.files("sparsens") / "data" / "constants.json"))


class Registry:
    def __init__(self, data: dict, source: str = "<memory>", digest: str | None = None):
        if "version" not in data or "constants" not in data:
            raise ConfigError(f"registry {source} lacks 'version' or 'constants'")
        self.data = data
        self.source = source
        self.digest = digest or hashlib.sha256(dumps(data).encode()).hexdigest()

    @property
    def version(self) -> str:
        return f"{self.data['version']}+{self.digest[:12]}"

    def kernel_table(self, kind: str, d: int) -> dict:
        try:
            return self.data["kernels"][kind][str(d)]
        except KeyError:
            raise CalibrationError(
                f"registry {self.source} has no {kind} kernel table for d={d}"
            ) from None

    def lookup(self, section: str, d: int, p="*") -> dict:
        """Constants for (section, d, p), falling back to the p-independent entry."""
        key = "*" if p == "*" else format_exponent(parse_exponent(p))
        fallback = None
        for entry in self.data["constants"]:
            if entry["section"] != section or entry["d"] != d:
                continue
            if entry["p"] == key:
                return entry["values"]
            if entry["p"] == "*":
                fallback = entry["values"]
        if fallback is None:
            raise CalibrationError(
                f"no calibrated constants for section={section}, d={d}, p={key}"
            )
        return fallback

    def constant(self, section: str, name: str, d: int, p="*"):
        values = self.lookup(section, d, p)
        if name not in values:
            raise CalibrationError(f"constant {name!r} missing from {section}, d={d}")
        return values[name]


def dumps(data: dict) -> str:
    return json.dumps(data, indent=1, sort_keys=True, allow_nan=False) + "\n"


def load_registry(path=None) -> Registry:
    path = Path(path) if path is not None else default_path()
    try:
        raw = path.read_bytes()
    except OSError as exc:
        raise ConfigError(f"cannot read constants registry {path}: {exc}") from None
    digest = hashlib.sha256(raw).hexdigest()
    key = (str(path), digest)
    if key not in _CACHE:
        try:
            data = json.loads(raw)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"registry {path} is not valid JSON: {exc}") from None
        _CACHE[key] = Registry(data, str(path), digest)
    return _CACHE[key]


def save_registry(data: dict, path) -> Registry:
    text = dumps(data)
    Path(path).write_text(text)
    return Registry(data, str(path), hashlib.sha256(text.encode()).hexdigest())


def dyadic_ceil(x: float) -> float:
    """Smallest power of two >= x."""
    if x <= 0:
        raise CalibrationError(f"cannot round {x} to a dyadic constant")
    k = math.ceil(math.log2(x) - 1e-12)
    return 2.0**k
