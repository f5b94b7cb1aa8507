"""
Entry point for running countate as a module.

Usage: python -m countate

"The main entry point. Where it all begins. Or ends." — schema.cx
"""

from .cli import run

if __name__ == "__main__":
    run()
