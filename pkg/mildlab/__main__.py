"""
Entry point for running mildlab as a module: python -m mildlab
"""

from mildlab.cli import app

if __name__ == "__main__":
    app()
