"""
Sparse2Dense - Profile Manager Module
Named codec profiles: built-in operating points plus JSON/YAML files in
the profiles directory.
"""

import json
from dataclasses import dataclass, field, fields
from datetime import datetime
from pathlib import Path
from typing import Any, Dict, List, Optional

import yaml

from ..config import Config, CodecConfig
from .errors import ConfigError
from .logger import Logger

PROFILE_SUFFIXES = ('.json', '.yaml', '.yml')


@dataclass
class Profile:
    """A named set of CodecConfig overrides, stored flat."""
    name: str
    description: str = ''
    created: str = field(default_factory=lambda: datetime.now().isoformat())
    modified: str = field(default_factory=lambda: datetime.now().isoformat())
    settings: Dict[str, Any] = field(default_factory=dict)

    def to_dict(self) -> Dict[str, Any]:
        data = {
            'name': self.name,
            'description': self.description,
            'created': self.created,
            'modified': self.modified,
        }
        data.update(self.settings)
        return data

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'Profile':
        # Unknown keys are dropped
        own = {f.name for f in fields(cls)} - {'settings'}
        knobs = {f.name for f in fields(CodecConfig)}
        return cls(
            **{k: v for k, v in data.items() if k in own},
            settings={k: v for k, v in data.items() if k in knobs},
        )

    def to_config(self) -> CodecConfig:
        return CodecConfig.from_dict(self.settings).validate()


class ProfileManager:
    """
    Resolves profile names to CodecConfigs.
    Files in the profiles directory shadow built-ins of the same name.
    """

    DEFAULT_PROFILES = {
        'desk': Profile(
            name='desk',
            description='Desk-scale defaults: K=15, q_log2=6, D=4',
        ),
        'fine': Profile(
            name='fine',
            description='Fine keypoint quantization (q_log2=8)',
            settings={'q_log2': 8},
        ),
        'coarse': Profile(
            name='coarse',
            description='Coarse keypoint quantization (q_log2=4)',
            settings={'q_log2': 4},
        ),
        'planar': Profile(
            name='planar',
            description='Single depth slice (D=1), 2D keypoints',
            settings={'depth': 1},
        ),
    }

    def __init__(self, profiles_dir: Optional[Path] = None):
        self.logger = Logger.get_instance()
        self.profiles_dir = Path(profiles_dir) if profiles_dir else Config.get_paths().profiles
        self._cache: Dict[str, Profile] = {}

    def _files(self) -> Dict[str, Path]:
        if not self.profiles_dir.is_dir():
            return {}
        return {p.stem: p for p in sorted(self.profiles_dir.iterdir())
                if p.is_file() and p.suffix.lower() in PROFILE_SUFFIXES}

    def list_profiles(self) -> List[str]:
        return sorted(set(self.DEFAULT_PROFILES) | set(self._files()))

    def get(self, name: str) -> Optional[Profile]:
        if name in self._cache:
            return self._cache[name]

        path = self._files().get(name)
        if path is not None:
            profile = self.load(path)
            self._cache[name] = profile
            return profile

        return self.DEFAULT_PROFILES.get(name)

    def config_for(self, name: str) -> CodecConfig:
        profile = self.get(name)
        if profile is None:
            raise ConfigError(f"Unknown profile '{name}'", available=', '.join(self.list_profiles()))
        return profile.to_config()

    def load(self, filepath: Path) -> Profile:
        """Parse a profile file; unreadable or malformed files raise ConfigError."""
        try:
            with open(filepath, 'r', encoding='utf-8') as f:
                if filepath.suffix.lower() == '.json':
                    data = json.load(f)
                else:
                    data = yaml.safe_load(f)
            if not isinstance(data, dict):
                raise ValueError("profile file must hold a mapping")
        except (OSError, ValueError, yaml.YAMLError) as e:
            self.logger.error(f"Failed to load profile from {filepath}: {e}")
            raise ConfigError(f"Cannot load profile file {filepath.name}", reason=str(e)) from e
        data.setdefault('name', filepath.stem)
        return Profile.from_dict(data)

    def save(self, profile: Profile, filepath: Optional[Path] = None) -> Path:
        profile.modified = datetime.now().isoformat()
        if filepath is None:
            filepath = self.profiles_dir / f"{profile.name}.json"
        filepath = Path(filepath)
        filepath.parent.mkdir(parents=True, exist_ok=True)

        with open(filepath, 'w', encoding='utf-8') as f:
            if filepath.suffix.lower() == '.json':
                json.dump(profile.to_dict(), f, indent=2, ensure_ascii=False)
            else:
                yaml.safe_dump(profile.to_dict(), f, sort_keys=False)

        self._cache[profile.name] = profile
        return filepath

    def create(self, name: str, base: Optional[str] = None, description: str = '',
               suffix: str = '.json', **settings: Any) -> Profile:
        """New profile inheriting `base` settings; saved to the profiles directory."""
        if suffix not in PROFILE_SUFFIXES:
            raise ConfigError(f"Unsupported profile format '{suffix}'",
                              expected=', '.join(PROFILE_SUFFIXES))
        merged: Dict[str, Any] = {}
        if base:
            base_profile = self.get(base)
            if base_profile is None:
                raise ConfigError(f"Unknown base profile '{base}'")
            merged.update(base_profile.settings)
        merged.update(settings)
        profile = Profile(name=name, description=description, settings=merged)
        profile.to_config()
        self.save(profile, self.profiles_dir / f"{name}{suffix}")
        self.logger.info("Created profile", name=name, base=base or '-')
        return profile

    def get_profile_info(self, name: str) -> Optional[Dict[str, Any]]:
        profile = self.get(name)
        if not profile:
            return None
        return {
            'name': profile.name,
            'description': profile.description,
            'builtin': name in self.DEFAULT_PROFILES and name not in self._files(),
            'settings': dict(profile.settings),
        }