"""Small shared CSV writer: one optional leading comment line, a header,
then rows.  All emitters in the package funnel through here so output
stays byte-identical for identical inputs."""

from __future__ import annotations

import math
from typing import Iterable, Optional, Sequence


def format_value(v) -> str:
    """Stable, compact formatting: floats via repr (shortest round-trip),
    everything else via str; None becomes the empty field."""
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        if math.isnan(v):
            return "nan"
        return repr(v)
    return str(v)


def write_csv(
    path: str,
    header: Sequence[str],
    rows: Iterable[Sequence],
    comment: Optional[str] = None,
) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        if comment:
            fh.write("# " + comment.replace("\n", " ") + "\n")
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(format_value(v) for v in row) + "\n")
