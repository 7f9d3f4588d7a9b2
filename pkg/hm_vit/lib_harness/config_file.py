#!/usr/bin/env python3

"""
This file contains the functionality for loading the settings profiles

A profile is an INI file read with configparser. Every section maps to a
pydantic model that forbids unknown keys, so a typo in a key name is an
error instead of a silently ignored setting. Missing keys take the desk
defaults.

Profiles live in Settings/<name>/config.ini next to this program; --config
accepts either such a name or a path to any INI file.

"""


import configparser
import hashlib
import json
import os
from typing import List

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from lib_autodiff.errors import ConfigurationError


SETTINGS_DIRECTORY = os.path.join(os.path.dirname(os.path.dirname(os.path.realpath(__file__))), 'Settings')

DEFAULT_PROFILE = 'desk'

# Sections whose values change the shape or meaning of a checkpoint
MODEL_SECTIONS = ('grid', 'model', 'fusion', 'fov')


class _Section(BaseModel):
    model_config = ConfigDict(extra='forbid')


class GridSettings(_Section):
    height: int = Field(32, ge=1)
    width: int = Field(32, ge=1)
    resolution: float = Field(1.5625, gt=0.0)


class ModelSettings(_Section):
    channels: int = Field(32, ge=1)
    heads: int = Field(4, ge=1)
    window: int = Field(4, ge=1)
    mlp_ratio: float = Field(2.0, gt=0.0)


class FusionSettings(_Section):
    iterations: int = Field(2, ge=1)
    comm_range: float = Field(70.0, gt=0.0)
    global_mode: str = 'cross_agent'
    use_local: bool = True
    use_global: bool = True
    hetero_norm_mlp: bool = True

    @field_validator('global_mode')
    @classmethod
    def _known_mode(cls, value):
        if value not in ('cross_agent', 'strict'):
            raise ValueError(f"global_mode must be cross_agent or strict, got {value}")
        return value


class CompressionSettings(_Section):
    rate: int = 1

    @field_validator('rate')
    @classmethod
    def _known_rate(cls, value):
        if value not in (1, 8, 16, 32):
            raise ValueError(f"rate must be one of 1, 8, 16, 32, got {value}")
        return value


class FovSettings(_Section):
    """
    Sensor ranges in meters, also the radius of each sender's FoV mask
    """
    camera: float = Field(30.0, gt=0.0)
    lidar: float = Field(50.0, gt=0.0)

    @model_validator(mode='after')
    def _camera_shorter(self):
        if self.camera > self.lidar:
            raise ValueError("camera range must not exceed lidar range")
        return self


class TrainingSettings(_Section):
    lr: float = Field(2e-3, gt=0.0)
    lr_min: float = Field(1e-5, ge=0.0)
    weight_decay: float = Field(1e-2, ge=0.0)
    epochs_stage1: int = Field(30, ge=1)
    epochs_stage2: int = Field(10, ge=1)
    batch_size: int = Field(4, ge=1)
    seed: int = Field(0, ge=0)
    # Epochs without a better validation loss before stopping, 0 disables
    patience: int = Field(5, ge=0)
    status_every: int = Field(25, ge=1)


class DatasetSettings(_Section):
    train_scenes: int = Field(200, ge=1)
    val_scenes: int = Field(40, ge=1)
    test_scenes: int = Field(60, ge=1)
    vehicles: int = Field(14, ge=0)
    min_agents: int = Field(2, ge=1)
    max_agents: int = Field(4, ge=1)
    extent: float = Field(60.0, gt=0.0)
    modality_mix: float = Field(0.5, ge=0.0, le=1.0)
    camera_noise: float = Field(0.5, ge=0.0)
    camera_noise_distance: float = Field(20.0, gt=0.0)
    n_rays: int = Field(720, ge=90)

    @model_validator(mode='after')
    def _agent_range(self):
        if self.min_agents > self.max_agents:
            raise ValueError("min_agents must not exceed max_agents")
        return self


class EvalSettings(_Section):
    ratios: List[float] = [0.0, 0.25, 0.5, 0.75, 1.0]
    rates: List[int] = [1, 8, 16, 32]
    max_agents: int = Field(4, ge=1)
    score_threshold: float = Field(0.1, ge=0.0, lt=1.0)
    nms_threshold: float = Field(0.15, gt=0.0, le=1.0)
    max_detections: int = Field(100, ge=1)
    n_jobs: int = 1

    @field_validator('ratios', 'rates', mode='before')
    @classmethod
    def _split_list(cls, value):
        if isinstance(value, str):
            return [item.strip() for item in value.split(',') if item.strip()]
        return value


class Settings(_Section):
    grid: GridSettings = GridSettings()
    model: ModelSettings = ModelSettings()
    fusion: FusionSettings = FusionSettings()
    compression: CompressionSettings = CompressionSettings()
    fov: FovSettings = FovSettings()
    training: TrainingSettings = TrainingSettings()
    dataset: DatasetSettings = DatasetSettings()
    eval: EvalSettings = EvalSettings()

    def fingerprint(self):
        """
        Short hash of the model defining sections, stored in checkpoints
        """
        model_part = {name: getattr(self, name).model_dump() for name in MODEL_SECTIONS}
        text = json.dumps(model_part, sort_keys=True)
        return hashlib.sha256(text.encode('utf-8')).hexdigest()[:16]

    def with_seed(self, seed):
        if seed is None:
            return self
        training = self.training.model_copy(update={'seed': seed})
        return self.model_copy(update={'training': training})


def resolve_profile(name_or_path, settings_directory=SETTINGS_DIRECTORY):
    """
    Returns the INI path for a profile name or an explicit path
    """
    if os.path.isfile(name_or_path):
        return name_or_path
    candidate = os.path.join(settings_directory, name_or_path, 'config.ini')
    if os.path.isfile(candidate):
        return candidate
    raise ConfigurationError(
        f"No settings file or profile named '{name_or_path}'. "
        f"Profiles are folders under {settings_directory}"
    )


def parse_settings(text, source='<string>'):
    """
    Validates INI text

    Raises:
        ConfigurationError on syntax errors, unknown sections or keys, and
        out of range values
    """
    config = configparser.ConfigParser(interpolation=None)
    try:
        config.read_string(text, source=source)
    except configparser.Error as msg:
        raise ConfigurationError(f"Could not parse {source}: {msg}") from msg

    raw = {section: dict(config.items(section)) for section in config.sections()}
    try:
        return Settings.model_validate(raw)
    except ValidationError as msg:
        raise ConfigurationError(f"Invalid settings in {source}:\n{msg}") from msg


def load_settings(name_or_path=DEFAULT_PROFILE, seed=None, settings_directory=SETTINGS_DIRECTORY):
    """
    Loads and validates a settings profile

    Inputs:
        name_or_path: Profile name (e.g. 'desk', 'full') or INI path

        seed: Optional override of [training] seed

        settings_directory: Where named profiles are looked up

    Returns:
        Settings
    """
    path = resolve_profile(name_or_path, settings_directory)
    with open(path, 'r', encoding='utf-8') as file:
        settings = parse_settings(file.read(), source=path)
    return settings.with_seed(seed)
