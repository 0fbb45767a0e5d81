"""Adversarial-input testbed for learned power-grid controllers."""
from importlib import resources

__version__ = "0.1.0"


def data_path(*parts: str):
    """Path to a bundled case or profile, e.g. ``data_path("cases", "case6.json")``."""
    return resources.files(__name__).joinpath("data", *parts)
