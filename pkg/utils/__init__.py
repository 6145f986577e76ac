"""Utils module - shared errors, configuration, logging and manifests"""
from .errors import TumorCascadeError, ConfigInvalid, ManifestError
from .config import RunConfig, load_run_config

__all__ = [
    "TumorCascadeError",
    "ConfigInvalid",
    "ManifestError",
    "RunConfig",
    "load_run_config",
]
