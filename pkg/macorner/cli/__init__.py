"""Command-line interface for macorner."""

from .commands import main as main
