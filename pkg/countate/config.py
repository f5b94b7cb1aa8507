"""
Fit settings and named configuration profiles.

"Configuration is just organized preferences. Save them wisely." — schema.cx
"""

from __future__ import annotations

import logging
import os
from dataclasses import asdict, dataclass, field, fields
from datetime import datetime
from enum import Enum
from pathlib import Path
from typing import Any

import yaml

from .closed_form import AteVariant
from .gibbs import GibbsConfig
from .imputation import BetaSource
from .models import ModelSpec, Overdispersion, ZeroPolicy
from .oracle import OracleConfig
from .pipeline import CsvSchema
from .validation import ValidationError

logger = logging.getLogger(__name__)

CONFIG_DIR_ENV = "COUNTATE_CONFIG_DIR"


class Engine(str, Enum):
    """Posterior sampler behind ``fit``."""

    APPROX = "approx"
    EXACT = "exact"


@dataclass
class FitSettings:
    """
    Everything ``countate fit`` needs besides the data file.

    "Profiles are just memories for your settings." — schema.cx
    """

    name: str = "default"

    # Column mapping
    y_col: str = "y"
    w_col: str = "w"
    x_cols: list[str] | None = None
    delimiter: str = ","

    # Model
    model: str = Overdispersion.POISSON.value
    sigma_beta_sq: float = 1000.0**2
    ig_c: list[float] = field(default_factory=lambda: [2.0, 1.0])
    ig_t: list[float] = field(default_factory=lambda: [2.0, 1.0])
    zero_policy: str = ZeroPolicy.DROP_ROW.value

    # Sampler
    engine: str = Engine.APPROX.value
    closed_form: bool = False
    variant: str = AteVariant.NB.value
    beta_source: str = BetaSource.CHAIN.value
    iters: int = 2000
    burn_in: int = 500
    thin: int = 1
    chains: int = 1
    seed: int = 0
    threads: int | None = None

    # Metadata
    created_at: str = field(default_factory=lambda: datetime.now().isoformat())
    updated_at: str = field(default_factory=lambda: datetime.now().isoformat())
    description: str = ""

    def __post_init__(self) -> None:
        for value, enum, label in (
            (self.model, Overdispersion, "model"),
            (self.zero_policy, ZeroPolicy, "zero policy"),
            (self.engine, Engine, "engine"),
            (self.variant, AteVariant, "variant"),
            (self.beta_source, BetaSource, "beta source"),
        ):
            allowed = [e.value for e in enum]
            if value not in allowed:
                raise ValidationError(f"Invalid {label} '{value}'. Must be one of: {', '.join(allowed)}")
        if len(self.ig_c) != 2 or len(self.ig_t) != 2:
            raise ValidationError("ig_c and ig_t must each hold (shape, scale)")
        if self.closed_form and self.model != Overdispersion.POISSON.value:
            raise ValidationError("--closed-form requires --model poisson")

    def model_spec(self) -> ModelSpec:
        return ModelSpec(
            sigma_beta_sq=float(self.sigma_beta_sq),
            overdispersion=Overdispersion(self.model),
            ig_c=(float(self.ig_c[0]), float(self.ig_c[1])),
            ig_t=(float(self.ig_t[0]), float(self.ig_t[1])),
            zero_policy=ZeroPolicy(self.zero_policy),
        )

    def csv_schema(self) -> CsvSchema:
        return CsvSchema(
            y_col=self.y_col,
            w_col=self.w_col,
            x_cols=tuple(self.x_cols) if self.x_cols is not None else None,
            delimiter=self.delimiter,
        )

    def gibbs_config(self) -> GibbsConfig:
        return GibbsConfig(iterations=self.iters, burn_in=self.burn_in, thin=self.thin, seed=self.seed)

    def oracle_config(self) -> OracleConfig:
        return OracleConfig(iterations=self.iters, burn_in=self.burn_in, thin=self.thin, seed=self.seed)

    def merged(self, overrides: dict[str, Any]) -> FitSettings:
        """Copy with every non-None override applied."""
        data = self.to_dict()
        data.update({key: value for key, value in overrides.items() if value is not None})
        return FitSettings.from_dict(data)

    def to_dict(self) -> dict[str, Any]:
        """Convert settings to dictionary."""
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> FitSettings:
        """Create settings from dictionary, ignoring unknown keys."""
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            logger.warning("Ignoring unknown settings: %s", ", ".join(unknown))
        return cls(**{key: value for key, value in data.items() if key in known})

    @classmethod
    def from_yaml(cls, path: Path) -> FitSettings:
        """Load settings from a YAML mapping."""
        try:
            with open(path, "r", encoding="utf-8") as f:
                data = yaml.safe_load(f) or {}
        except (OSError, yaml.YAMLError) as e:
            raise ValidationError(f"Cannot read settings file {path}: {e}") from e
        if not isinstance(data, dict):
            raise ValidationError(f"Settings file {path} must contain a mapping")
        return cls.from_dict(data)


def default_config_dir() -> Path:
    """``$COUNTATE_CONFIG_DIR`` or ``~/.config/countate``."""
    env = os.environ.get(CONFIG_DIR_ENV)
    return Path(env) if env else Path.home() / ".config" / "countate"


class ConfigManager:
    """
    Manages saved fit profiles.

    "A good manager knows where everything is. Even your configs." — schema.cx
    """

    PROFILES_FILE = "profiles.yaml"

    def __init__(self, config_dir: Path | None = None) -> None:
        """Initialize the configuration manager."""
        self.config_dir = config_dir or default_config_dir()
        self.profiles_path = self.config_dir / self.PROFILES_FILE
        self.config_dir.mkdir(parents=True, exist_ok=True)

    def _load_profiles(self) -> dict[str, dict[str, Any]]:
        """Load all profiles from the profiles file."""
        if not self.profiles_path.exists():
            return {}

        try:
            with open(self.profiles_path, "r", encoding="utf-8") as f:
                raw_data = yaml.safe_load(f) or {}
        except (OSError, yaml.YAMLError) as e:
            logger.warning("Unreadable profiles file %s: %s", self.profiles_path, e)
            return {}
        if not isinstance(raw_data, dict):
            return {}
        raw_profiles = raw_data.get("profiles", {})
        if not isinstance(raw_profiles, dict):
            return {}
        return {
            key: value
            for key, value in raw_profiles.items()
            if isinstance(key, str) and isinstance(value, dict)
        }

    def _save_profiles(self, profiles: dict[str, dict[str, Any]]) -> None:
        """Save all profiles to the profiles file."""
        with open(self.profiles_path, "w", encoding="utf-8") as f:
            yaml.safe_dump({"profiles": profiles}, f, default_flow_style=False, sort_keys=False)

    def save_profile(self, settings: FitSettings) -> None:
        """Save (or overwrite) a profile under ``settings.name``."""
        profiles = self._load_profiles()
        settings.updated_at = datetime.now().isoformat()
        profiles[settings.name] = settings.to_dict()
        self._save_profiles(profiles)

    def load_profile(self, name: str) -> FitSettings | None:
        """
        Load a profile by name.

        Returns:
            The settings if found, None otherwise
        """
        profiles = self._load_profiles()
        if name not in profiles:
            return None
        return FitSettings.from_dict(profiles[name])

    def delete_profile(self, name: str) -> bool:
        """
        Delete a profile.

        Returns:
            True if deleted, False if not found
        """
        profiles = self._load_profiles()
        if name not in profiles:
            return False
        del profiles[name]
        self._save_profiles(profiles)
        return True

    def list_profiles(self) -> list[FitSettings]:
        """All saved profiles, in file order."""
        return [FitSettings.from_dict(data) for data in self._load_profiles().values()]

    def export_profile(self, name: str, output_path: Path) -> bool:
        """Write one profile to its own YAML file. Returns False if it does not exist."""
        settings = self.load_profile(name)
        if settings is None:
            return False
        with open(output_path, "w", encoding="utf-8") as f:
            yaml.safe_dump(settings.to_dict(), f, default_flow_style=False, sort_keys=False)
        return True

    def import_profile(self, input_path: Path, new_name: str | None = None) -> FitSettings:
        """
        Import a profile from a YAML file and save it.

        Raises:
            ValidationError: the file is unreadable or holds invalid settings
        """
        settings = FitSettings.from_yaml(input_path)
        if new_name:
            settings.name = new_name
        self.save_profile(settings)
        return settings

    def get_profile_path(self) -> Path:
        """Get the path to the profiles file."""
        return self.profiles_path
