"""
Solution path files (one per path, header t, c1..cN) and the ensemble manifest.
"""

from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import pyarrow as pa

from mildlab.errors import IncompatibleEnsembleError
from mildlab.formats._common import _read_json, _read_table, _write_json, _write_table
from mildlab.solver import SolutionPath

MANIFEST_NAME = "manifest.json"
PATH_NAME_FORMAT = "path-%06d"


def _path_table(times: np.ndarray, states: np.ndarray) -> pa.Table:
    columns = {"t": pa.array(times, type=pa.float64())}
    for mode in range(states.shape[1]):
        columns[f"c{mode + 1}"] = pa.array(states[:, mode], type=pa.float64())
    return pa.table(columns)


def write_path(path: SolutionPath, output: Union[str, Path], force: bool = True) -> Path:
    """Write the window part of ``path`` (burn-in excluded)."""
    return _write_table(_path_table(path.window_times(), path.window_states()), output, force)


def read_path(source: Union[str, Path]) -> Tuple[np.ndarray, np.ndarray]:
    """Return (times, states) from a path file."""
    table = _read_table(source)
    names = table.column_names
    if not names or names[0] != "t":
        raise ValueError(f"{source}: first column must be 't'")
    expected = [f"c{index}" for index in range(1, len(names))]
    if names[1:] != expected:
        raise ValueError(f"{source}: coefficient columns must be named c1..cN")
    times = table.column("t").to_numpy()
    states = np.column_stack([table.column(name).to_numpy() for name in expected])
    return times, states


def write_ensemble(
    paths: Sequence[SolutionPath],
    directory: Union[str, Path],
    suffix: str = ".csv",
    progress_callback: Optional[Callable[[int, int], None]] = None,
) -> List[Path]:
    """Write one file per path, named by path index."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    written = []
    for index, path in enumerate(paths):
        written.append(write_path(path, directory / f"{PATH_NAME_FORMAT % index}{suffix}"))
        if progress_callback is not None:
            progress_callback(index + 1, len(paths))
    return written


def write_manifest(manifest: Dict[str, Any], directory: Union[str, Path]) -> Path:
    return _write_json(manifest, Path(directory) / MANIFEST_NAME)


def read_manifest(directory: Union[str, Path]) -> Dict[str, Any]:
    directory = Path(directory)
    if not directory.is_dir():
        raise FileNotFoundError(f"Run directory not found: {directory}")
    return _read_json(directory / MANIFEST_NAME)


def read_ensemble(directory: Union[str, Path]) -> Tuple[Dict[str, Any], List[SolutionPath]]:
    """Load a simulated ensemble back as window-only SolutionPaths."""
    directory = Path(directory)
    manifest = read_manifest(directory)
    files = manifest.get("outputs", {}).get("paths")
    if not files:
        raise IncompatibleEnsembleError(f"{directory} does not contain an ensemble")
    seed = int(manifest.get("seed", 0))
    paths = []
    for index, name in enumerate(files):
        times, states = read_path(directory / name)
        paths.append(SolutionPath(grid=times, states=states, noise_ref=(seed, index, 0)))
    return manifest, paths
