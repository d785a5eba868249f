"""Lightweight output formatters that bypass Rich for scriptable CLI output."""

import csv
import json
import sys
from pathlib import Path
from typing import Any, Dict, Iterable


def _flatten(prefix: str, value: Any) -> Iterable[tuple]:
    if isinstance(value, dict):
        for key, item in value.items():
            yield from _flatten(f"{prefix}.{key}" if prefix else str(key), item)
    else:
        yield prefix, value


class PlainOutputFormatter:
    """Tab-separated key/value output with minimal overhead."""

    @staticmethod
    def _writer() -> csv.writer:
        return csv.writer(sys.stdout, delimiter="\t", lineterminator="\n")

    @staticmethod
    def _normalize_value(value: Any) -> Any:
        if value is None:
            return ""
        if isinstance(value, bool):
            return str(value).lower()
        if isinstance(value, (list, tuple)):
            return ",".join(str(item) for item in value)
        if isinstance(value, str):
            return value.replace("\t", "\\t").replace("\n", "\\n")
        return value

    @staticmethod
    def _write_pairs(pairs: Iterable[tuple]) -> None:
        writer = PlainOutputFormatter._writer()
        for key, value in pairs:
            writer.writerow([key, PlainOutputFormatter._normalize_value(value)])

    @staticmethod
    def print_error(message: str) -> None:
        print(f"Error: {message}", file=sys.stderr)

    @staticmethod
    def print_hypothesis_report(report: Dict[str, Any], summary: str, path: Path) -> None:
        del report, path
        print(summary)

    @staticmethod
    def print_simulation_result(manifest: Dict[str, Any], directory: Path) -> None:
        PlainOutputFormatter._write_pairs(
            [
                ("directory", str(directory)),
                ("scenario_hash", manifest["scenario_hash"]),
                ("n_paths", manifest["n_paths"]),
                ("seed", manifest["seed"]),
                ("max_iterations", max(manifest["iterations"])),
                *_flatten("self_convergence", manifest.get("self_convergence") or {}),
            ]
        )

    @staticmethod
    def print_automorphy_report(
        summary: Dict[str, Any], rows: Iterable[Dict[str, Any]], directory: Path
    ) -> None:
        PlainOutputFormatter._write_pairs([("directory", str(directory)), *summary.items()])
        writer = PlainOutputFormatter._writer()
        writer.writerow(["role", "tau", "epsilon", "mean_beta", "max_beta"])
        for row in rows:
            writer.writerow(
                [row["role"], row["tau"], row["epsilon"], row["mean_beta"], row["max_beta"]]
            )

    @staticmethod
    def print_run(run: Dict[str, Any]) -> None:
        PlainOutputFormatter._write_pairs(
            [
                ("directory", run["directory"]),
                ("kind", run["manifest"]["kind"]),
                *_flatten("", run["details"]),
            ]
        )


class JsonOutputFormatter:
    """JSON output, one document per command."""

    @staticmethod
    def print_error(message: str) -> None:
        print(json.dumps({"error": message}), file=sys.stderr)

    @staticmethod
    def print_hypothesis_report(report: Dict[str, Any], summary: str, path: Path) -> None:
        print(json.dumps({**report, "summary": summary, "report": str(path)}, default=str))

    @staticmethod
    def print_simulation_result(manifest: Dict[str, Any], directory: Path) -> None:
        print(json.dumps({"directory": str(directory), "manifest": manifest}, default=str))

    @staticmethod
    def print_automorphy_report(
        summary: Dict[str, Any], rows: Iterable[Dict[str, Any]], directory: Path
    ) -> None:
        payload = {"directory": str(directory), "summary": summary, "shifts": list(rows)}
        print(json.dumps(payload, default=str))

    @staticmethod
    def print_run(run: Dict[str, Any]) -> None:
        print(json.dumps(run, default=str))
