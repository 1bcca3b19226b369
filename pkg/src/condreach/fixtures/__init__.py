"""Bundled benchmark models and evidences."""

from importlib import resources


def fixture_path(name):
    """Filesystem path of a bundled fixture file."""
    return resources.files(__package__) / name


def fixture_text(name):
    return fixture_path(name).read_text(encoding="utf-8")
