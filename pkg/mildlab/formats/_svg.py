"""
Static SVG chart of beta against recurrence error.
"""

from pathlib import Path
from typing import Any, Union

from mildlab.metrics import AutomorphyReport


def _require_matplotlib() -> Any:
    """Import matplotlib lazily and raise actionable error when unavailable."""
    try:
        import matplotlib

        matplotlib.use("Agg")
        import matplotlib.pyplot as plt
    except ImportError as e:
        raise ValueError(
            "SVG charts require 'matplotlib'. Install it with: pip install 'mildlab-cli[plot]'"
        ) from e
    return plt


def write_automorphy_svg(report: AutomorphyReport, path: Union[str, Path]) -> Path:
    plt = _require_matplotlib()
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)

    with plt.rc_context({"svg.hashsalt": "mildlab"}):
        fig, ax = plt.subplots(figsize=(6.0, 4.0))
        for role, marker, label in (
            ("shift", "o", "recurrence shifts"),
            ("control", "x", "control"),
        ):
            rows = [row for row in report.rows if row.role == role]
            if rows:
                ax.scatter(
                    [row.epsilon for row in rows],
                    [row.beta for row in rows],
                    marker=marker,
                    label=label,
                )
        ax.set_xlabel("recurrence error epsilon")
        ax.set_ylabel("beta(law at t + tau, law at t)")
        ax.set_title(f"{report.scenario_name} (m = {report.projection_dim})")
        ax.legend()
        fig.tight_layout()
        # No date metadata: reruns must be byte-identical.
        fig.savefig(path, format="svg", metadata={"Date": None})
        plt.close(fig)
    return path
