"""
mildlab.formats: internal artifact I/O (paths, manifests, noise dumps, reports, charts).
"""

from mildlab.formats._common import SUPPORTED_TABLE_FORMATS
from mildlab.formats._noise_dump import dump_segment
from mildlab.formats._paths import (
    MANIFEST_NAME,
    read_ensemble,
    read_manifest,
    read_path,
    write_ensemble,
    write_manifest,
    write_path,
)
from mildlab.formats._reports import (
    AUTOMORPHY_SUMMARY_NAME,
    AUTOMORPHY_TABLE_NAME,
    HYPOTHESIS_REPORT_NAME,
    read_automorphy_table,
    read_hypothesis_report,
    write_automorphy_summary,
    write_automorphy_table,
    write_hypothesis_report,
)
from mildlab.formats._svg import write_automorphy_svg

__all__ = [
    "SUPPORTED_TABLE_FORMATS",
    "MANIFEST_NAME",
    "HYPOTHESIS_REPORT_NAME",
    "AUTOMORPHY_TABLE_NAME",
    "AUTOMORPHY_SUMMARY_NAME",
    "dump_segment",
    "read_path",
    "write_path",
    "read_ensemble",
    "write_ensemble",
    "read_manifest",
    "write_manifest",
    "read_hypothesis_report",
    "write_hypothesis_report",
    "read_automorphy_table",
    "write_automorphy_table",
    "write_automorphy_summary",
    "write_automorphy_svg",
]
