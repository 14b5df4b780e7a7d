"""Run configuration: one JSON document, optionally based on a named preset."""

import logging
import math
import os
from dataclasses import dataclass, field, replace
from fractions import Fraction
from pathlib import Path
from typing import Any

import yaml

from .errors import InputError
from .lattice import Mat2, Mat3, Triple, polynomial_by_tag
from .orbit import (
    DEFAULT_BUDGET_NODES,
    DEFAULT_MAX_WORD_LENGTH,
    DEFAULT_SLACK,
    EnumParams,
    GroupPresentation,
)
from .presets import get_preset

logger = logging.getLogger(__name__)

# Current config schema version
CURRENT_VERSION = "1"

DEFAULT_PRESET = "full-orbit"

GENERATOR_FORMS: tuple[str, ...] = ("sl2", "soq")
HOROCYCLE_MODES: tuple[str, ...] = ("any", "finite", "infinite")

_TOP_LEVEL_KEYS = frozenset(
    {
        "version",
        "preset",
        "description",
        "group",
        "enumeration",
        "radii",
        "fit_windows",
        "polynomial",
        "prime_bound",
        "sieve",
        "census",
        "outputs",
        "threads",
        "seed",
    }
)


class ConfigVersionError(InputError):
    """Raised when config version is incompatible."""

    pass


class ConfigValidationError(InputError):
    """Raised when config values are invalid."""

    pass


def _validate_version(version: Any) -> str:
    """Validate config version and return it as a string.

    Raises:
        ConfigVersionError: If version is missing or not supported
    """
    if version is None:
        logger.warning("Config missing version field, assuming version '1'")
        return CURRENT_VERSION
    if str(version) != CURRENT_VERSION:
        raise ConfigVersionError(
            f"Unrecognized config version '{version}'. "
            f"Supported versions: {CURRENT_VERSION}"
        )
    return CURRENT_VERSION


def _merge(base: dict[str, Any], override: dict[str, Any]) -> dict[str, Any]:
    """Recursively overlay ``override`` on ``base``; lists replace wholesale."""
    merged = dict(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = _merge(merged[key], value)
        else:
            merged[key] = value
    return merged


def _matrix(value: Any, size: int) -> tuple[tuple[int, ...], ...]:
    if (
        not isinstance(value, list)
        or len(value) != size
        or any(not isinstance(row, list) or len(row) != size for row in value)
    ):
        raise ConfigValidationError(f"Expected a {size}×{size} matrix, got {value!r}")
    for row in value:
        for entry in row:
            if isinstance(entry, bool) or not isinstance(entry, int):
                raise ConfigValidationError(
                    f"Matrix entries must be integers, got {entry!r} in {value!r}"
                )
    return tuple(tuple(row) for row in value)


def _validate_group(group: Any) -> dict[str, Any]:
    if not isinstance(group, dict):
        raise ConfigValidationError("'group' must be a mapping")
    form = group.get("generator_form", "sl2")
    if form not in GENERATOR_FORMS:
        raise ConfigValidationError(
            f"Invalid generator_form '{form}'. Valid: {', '.join(GENERATOR_FORMS)}"
        )
    size = 2 if form == "sl2" else 3
    generators = group.get("generators", [])
    if not isinstance(generators, list):
        raise ConfigValidationError("'group.generators' must be a list of matrices")
    base_point = group.get("base_point", [3, 4, 5])
    if (
        not isinstance(base_point, list)
        or len(base_point) != 3
        or any(isinstance(v, bool) or not isinstance(v, int) for v in base_point)
    ):
        raise ConfigValidationError(
            f"'group.base_point' must be three integers, got {base_point!r}"
        )
    return {
        "label": str(group.get("label", "")),
        "generator_form": form,
        "generators": [_matrix(g, size) for g in generators],
        "base_point": tuple(base_point),
    }


def _positive_number(name: str, value: Any, *, allow_inf: bool = False) -> float:
    if value == "inf" and allow_inf:
        return math.inf
    if isinstance(value, bool) or not isinstance(value, int | float) or value <= 0:
        raise ConfigValidationError(
            f"'{name}' must be a positive number, got {value!r}"
        )
    return float(value)


def _positive_int(name: str, value: Any) -> int:
    if isinstance(value, bool) or not isinstance(value, int) or value < 1:
        raise ConfigValidationError(
            f"'{name}' must be a positive integer, got {value!r}"
        )
    return value


def _validate_radii(radii: Any) -> tuple[float, ...]:
    if not isinstance(radii, list) or not radii:
        raise ConfigValidationError("'radii' must be a non-empty list")
    values = tuple(_positive_number("radii", r) for r in radii)
    if any(b <= a for a, b in zip(values, values[1:], strict=False)):
        raise ConfigValidationError(f"'radii' must increase strictly, got {radii!r}")
    return values


def _theta(value: Any) -> float:
    """θ as a number or a fraction string such as "39/64"."""
    try:
        theta = float(Fraction(str(value)))
    except (ValueError, ZeroDivisionError):
        raise ConfigValidationError(f"Invalid theta {value!r}") from None
    if not 0.5 <= theta < 1:
        raise ConfigValidationError(f"theta must lie in [1/2, 1), got {value!r}")
    return theta


@dataclass(frozen=True)
class SieveSettings:
    """``delta`` is a number in (θ, 1] or ``None`` to use the fitted exponent."""

    delta: float | None = None
    theta: float = 0.5
    mode: str = "any"
    r_targets: tuple[int, ...] = (14,)
    kappa: int | None = None


def _validate_sieve(data: Any) -> SieveSettings:
    if not isinstance(data, dict):
        raise ConfigValidationError("'sieve' must be a mapping")
    raw_delta = data.get("delta", "fit")
    delta = None if raw_delta == "fit" else _positive_number("sieve.delta", raw_delta)
    if delta is not None and delta > 1:
        raise ConfigValidationError(f"sieve.delta must be at most 1, got {delta}")
    mode = data.get("mode", "any")
    if mode not in HOROCYCLE_MODES:
        raise ConfigValidationError(
            f"Invalid sieve.mode '{mode}'. Valid: {', '.join(HOROCYCLE_MODES)}"
        )
    targets = data.get("r_targets", [14])
    if not isinstance(targets, list):
        raise ConfigValidationError("'sieve.r_targets' must be a list")
    kappa = data.get("kappa")
    return SieveSettings(
        delta=delta,
        theta=_theta(data.get("theta", 0.5)),
        mode=mode,
        r_targets=tuple(_positive_int("sieve.r_targets", r) for r in targets),
        kappa=None if kappa is None else _positive_int("sieve.kappa", kappa),
    )


@dataclass(frozen=True)
class RunConfig:
    """Validated run configuration.

    Built with ``load`` or ``from_dict``; a named preset supplies defaults
    for every key the document leaves out.
    """

    version: str = CURRENT_VERSION
    preset: str | None = DEFAULT_PRESET
    label: str = ""
    generator_form: str = "sl2"
    generators: tuple[tuple[tuple[int, ...], ...], ...] = ()
    base_point: tuple[int, int, int] = (3, 4, 5)
    slack: float = DEFAULT_SLACK
    max_word_length: int = DEFAULT_MAX_WORD_LENGTH
    budget_nodes: int = DEFAULT_BUDGET_NODES
    radii: tuple[float, ...] = (100.0, 1000.0, 10000.0)
    fit_windows: tuple[tuple[float, float], ...] = ()
    polynomial: str = "FH"
    prime_bound: int = 50
    sieve: SieveSettings = field(default_factory=SieveSettings)
    r_list: tuple[int, ...] = (4, 5)
    out_dir: str | None = None
    threads: int = field(default_factory=lambda: os.cpu_count() or 1)
    seed: int = 0

    @classmethod
    def load(cls, path: Path, *, preset: str | None = None) -> "RunConfig":
        """Load a config document (JSON, or YAML with the same keys).

        Raises:
            ConfigValidationError: If the file is unreadable or invalid
            ConfigVersionError: If its version is not supported
        """
        try:
            with open(path) as f:
                data = yaml.safe_load(f)
        except OSError as e:
            raise ConfigValidationError(f"Cannot read config {path}: {e}") from e
        except yaml.YAMLError as e:
            raise ConfigValidationError(f"Config {path} is not valid JSON: {e}") from e
        if not isinstance(data, dict):
            raise ConfigValidationError(f"Config {path} must contain an object")
        logger.debug(f"Loaded config from {path}")
        return cls.from_dict(data, preset=preset)

    @classmethod
    def from_preset(cls, name: str = DEFAULT_PRESET) -> "RunConfig":
        return cls.from_dict({"version": CURRENT_VERSION, "preset": name})

    @classmethod
    def from_dict(
        cls, data: dict[str, Any], *, preset: str | None = None
    ) -> "RunConfig":
        """Validate a raw document, merging it over its preset if it names one.

        ``preset`` replaces the preset named in the document.
        """
        if preset is not None:
            data = {**data, "preset": preset}
        version = _validate_version(data.get("version"))
        unknown = sorted(set(data) - _TOP_LEVEL_KEYS)
        if unknown:
            raise ConfigValidationError(f"Unknown config keys: {', '.join(unknown)}")

        preset = data.get("preset")
        if preset is None and "group" not in data:
            preset = DEFAULT_PRESET
        if preset is not None:
            data = _merge(get_preset(str(preset)), data)

        group = _validate_group(data.get("group", {}))
        enumeration = data.get("enumeration", {})
        if not isinstance(enumeration, dict):
            raise ConfigValidationError("'enumeration' must be a mapping")
        windows = data.get("fit_windows", [])
        if not isinstance(windows, list) or any(
            not isinstance(w, list) or len(w) != 2 for w in windows
        ):
            raise ConfigValidationError("'fit_windows' must be a list of [lo, hi]")
        polynomial = polynomial_by_tag(str(data.get("polynomial", "FH"))).tag.value
        census = data.get("census", {})
        outputs = data.get("outputs", {})
        if not isinstance(census, dict) or not isinstance(outputs, dict):
            raise ConfigValidationError("'census' and 'outputs' must be mappings")
        r_list = census.get("r_list", [4, 5])
        if not isinstance(r_list, list) or any(
            isinstance(r, bool) or not isinstance(r, int) or r < 0 for r in r_list
        ):
            raise ConfigValidationError(
                f"'census.r_list' must be integers ≥ 0, got {r_list!r}"
            )
        seed = data.get("seed", 0)
        if isinstance(seed, bool) or not isinstance(seed, int):
            raise ConfigValidationError(f"'seed' must be an integer, got {seed!r}")

        config = cls(
            version=version,
            preset=None if preset is None else str(preset),
            label=group["label"],
            generator_form=group["generator_form"],
            generators=tuple(group["generators"]),
            base_point=group["base_point"],
            slack=_positive_number(
                "enumeration.slack",
                enumeration.get("slack", DEFAULT_SLACK),
                allow_inf=True,
            ),
            max_word_length=_positive_int(
                "enumeration.max_word_length",
                enumeration.get("max_word_length", DEFAULT_MAX_WORD_LENGTH),
            ),
            budget_nodes=_positive_int(
                "enumeration.budget_nodes",
                enumeration.get("budget_nodes", DEFAULT_BUDGET_NODES),
            ),
            radii=_validate_radii(data.get("radii", [100, 1000, 10000])),
            fit_windows=tuple(
                (
                    _positive_number("fit_windows", lo),
                    _positive_number("fit_windows", hi),
                )
                for lo, hi in windows
            ),
            polynomial=polynomial,
            prime_bound=_positive_int("prime_bound", data.get("prime_bound", 50)),
            sieve=_validate_sieve(data.get("sieve", {})),
            r_list=tuple(r_list),
            out_dir=None if outputs.get("out_dir") is None else str(outputs["out_dir"]),
            threads=_positive_int("threads", data.get("threads", os.cpu_count() or 1)),
            seed=seed,
        )
        # Surfaces ParityError / DetError / InvalidGeneratorError at load time
        config.presentation()
        return config

    def with_overrides(self, **changes: Any) -> "RunConfig":
        """Copy with the given fields replaced; ``None`` values are ignored."""
        return replace(self, **{k: v for k, v in changes.items() if v is not None})

    def presentation(self) -> GroupPresentation:
        """The group this config describes, spin-lifted when given in SL₂ form."""
        base = Triple(*self.base_point)
        if self.generator_form == "sl2":
            mats2 = [Mat2(*row_a, *row_b) for row_a, row_b in self.generators]
            return GroupPresentation.from_sl2(mats2, base, self.label)
        mats3 = tuple(Mat3.of(g) for g in self.generators)
        return GroupPresentation(mats3, base, self.label)

    def enum_params(self, radius: float) -> EnumParams:
        return EnumParams(
            radius,
            slack=self.slack,
            max_word_length=self.max_word_length,
            budget_nodes=self.budget_nodes,
            threads=self.threads,
        )

    def to_dict(self) -> dict[str, Any]:
        """The effective configuration as a self-contained document."""
        sieve = self.sieve
        return {
            "version": self.version,
            "group": {
                "label": self.label,
                "generator_form": self.generator_form,
                "generators": [[list(row) for row in g] for g in self.generators],
                "base_point": list(self.base_point),
            },
            "enumeration": {
                "slack": "inf" if math.isinf(self.slack) else self.slack,
                "max_word_length": self.max_word_length,
                "budget_nodes": self.budget_nodes,
            },
            "radii": list(self.radii),
            "fit_windows": [list(w) for w in self.fit_windows],
            "polynomial": self.polynomial,
            "prime_bound": self.prime_bound,
            "sieve": {
                "delta": "fit" if sieve.delta is None else sieve.delta,
                "theta": sieve.theta,
                "mode": sieve.mode,
                "r_targets": list(sieve.r_targets),
                **({} if sieve.kappa is None else {"kappa": sieve.kappa}),
            },
            "census": {"r_list": list(self.r_list)},
            **({} if self.out_dir is None else {"outputs": {"out_dir": self.out_dir}}),
            "threads": self.threads,
            "seed": self.seed,
        }
