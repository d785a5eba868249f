"""
Shared table I/O used by every artifact writer: suffix dispatch between CSV and Parquet,
overwrite protection and JSON sidecars.
"""

import json
from pathlib import Path
from typing import Any, Dict, Iterable, Optional, Union

import pyarrow as pa
import pyarrow.csv as pacsv
import pyarrow.parquet as pq

SUPPORTED_TABLE_FORMATS = {".csv", ".parquet"}


def _table_suffix(path: Path) -> str:
    suffix = path.suffix.lower()
    if suffix not in SUPPORTED_TABLE_FORMATS:
        raise ValueError(f"Unsupported table format: {suffix or '<none>'}")
    return suffix


def _prepare_output(path: Path, force: bool = True) -> Path:
    """Create the parent directory and refuse to clobber unless ``force``."""
    path = Path(path)
    if path.exists():
        if not force:
            raise FileExistsError(f"Output file already exists: {path}")
        path.unlink()
    path.parent.mkdir(parents=True, exist_ok=True)
    return path


def _write_table(table: pa.Table, path: Union[str, Path], force: bool = True) -> Path:
    """Write ``table`` as CSV or Parquet depending on the suffix of ``path``."""
    path = Path(path)
    suffix = _table_suffix(path)
    _prepare_output(path, force=force)
    try:
        if suffix == ".parquet":
            pq.write_table(table, path)
        else:
            pacsv.write_csv(table, path)
    except Exception:
        try:
            path.unlink()
        except (FileNotFoundError, OSError):
            pass
        raise
    return path


def _read_table(path: Union[str, Path], columns: Optional[Iterable[str]] = None) -> pa.Table:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"File not found: {path}")
    suffix = _table_suffix(path)
    columns = list(columns) if columns is not None else None
    if suffix == ".parquet":
        return pq.read_table(path, columns=columns)
    convert_options = pacsv.ConvertOptions(include_columns=columns) if columns else None
    return pacsv.read_csv(path, convert_options=convert_options)


def _write_json(data: Dict[str, Any], path: Union[str, Path]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(data, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path


def _read_json(path: Union[str, Path]) -> Dict[str, Any]:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"File not found: {path}")
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except ValueError as e:
        raise ValueError(f"Invalid JSON in {path}: {e}") from e
    if not isinstance(data, dict):
        raise ValueError(f"Expected a JSON object in {path}")
    return data
