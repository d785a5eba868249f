"""
mildlab: numerical lab for almost automorphic mild solutions of Levy-driven
stochastic integro-differential equations.
"""


def _repo_root():
    """Return the repository root if this module appears to live in a source checkout."""
    from pathlib import Path

    candidate = Path(__file__).resolve().parent.parent
    if (candidate / "pyproject.toml").exists():
        return candidate
    return None


def _version_from_pyproject():
    import re

    repo_root = _repo_root()
    if repo_root is None:
        return None
    content = (repo_root / "pyproject.toml").read_text(encoding="utf-8")
    match = re.search(r'^version\s*=\s*["\']([^"\']+)["\']', content, re.MULTILINE)
    return match.group(1) if match else None


def _get_version() -> str:
    """
    Resolve the version lazily, pyproject.toml being the single source of truth.

    Installed metadata wins unless this is a source checkout, so ``import mildlab``
    stays cheap until ``__version__`` is read.
    """
    try:
        repo_root = _repo_root()
        if repo_root is not None and (repo_root / ".git").exists():
            version = _version_from_pyproject()
            if version:
                return version
    except OSError:
        pass

    try:
        from importlib.metadata import PackageNotFoundError, version

        return version("mildlab-cli")
    except PackageNotFoundError:
        pass

    try:
        return _version_from_pyproject() or "unknown"
    except OSError:
        return "unknown"


def __getattr__(name: str):
    if name == "__version__":
        value = _get_version()
        globals()["__version__"] = value
        return value
    raise AttributeError(f"module {__name__!r} has no attribute {name!r}")
