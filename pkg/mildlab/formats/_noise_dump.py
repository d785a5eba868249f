"""
Debug dump of a LevyPathSegment: long-format Wiener increments plus an event list.
"""

from pathlib import Path
from typing import Tuple, Union

import numpy as np
import pyarrow as pa

from mildlab.formats._common import _write_table
from mildlab.noise import LevyPathSegment


def _events_path(path: Path) -> Path:
    return path.with_name(f"{path.stem}-events{path.suffix}")


def dump_segment(segment: LevyPathSegment, path: Union[str, Path]) -> Tuple[Path, Path]:
    """Write increments (t, mode, increment) to ``path`` and events (t, size, mode, kind)
    to ``<stem>-events<suffix>``; the suffix selects CSV or Parquet."""
    path = Path(path)
    steps, modes = segment.wiener_increments.shape
    increments = pa.table(
        {
            "t": pa.array(np.repeat(segment.grid[:-1], modes), type=pa.float64()),
            "mode": pa.array(np.tile(np.arange(1, modes + 1), steps), type=pa.int64()),
            "increment": pa.array(segment.wiener_increments.reshape(-1), type=pa.float64()),
        }
    )
    small, large = segment.small_jumps, segment.large_jumps
    events = pa.table(
        {
            "t": pa.array(np.concatenate([small.times, large.times]), type=pa.float64()),
            "size": pa.array(np.concatenate([small.sizes, large.sizes]), type=pa.float64()),
            "mode": pa.array(np.concatenate([small.modes, large.modes]) + 1, type=pa.int64()),
            "kind": pa.array(["small"] * len(small) + ["large"] * len(large), type=pa.string()),
        }
    )
    order = np.argsort(events.column("t").to_numpy(), kind="stable")
    events = events.take(pa.array(order))
    return _write_table(increments, path), _write_table(events, _events_path(path))
