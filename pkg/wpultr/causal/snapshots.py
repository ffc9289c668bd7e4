"""
Graph snapshot stream (``graph_snapshots.ndjson``) and its edge-diff timeline.

Each line is ``{"step": t, "nodes": [...], "edges": [...]}``. Wall-clock
times are kept on the stream object and written to run metadata, so the
NDJSON file itself is byte-reproducible.
"""

import json
import logging
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Iterable

from wpultr.core.errors import GraphError
from wpultr.core.graph import CausalGraph

logger = logging.getLogger(__name__)

SNAPSHOT_FILE = "graph_snapshots.ndjson"


@dataclass
class SnapshotStream:
    """Append-only snapshot file; ``path=None`` keeps snapshots in memory only."""
    path: Path | None = None
    lines: list[str] = field(default_factory=list)
    timestamps: list[tuple[int, str]] = field(default_factory=list)

    def __post_init__(self):
        if self.path is not None:
            self.path = Path(self.path)
            self.path.parent.mkdir(parents=True, exist_ok=True)
            self.path.write_text("", encoding="utf-8")

    def append(self, line: str, step: int) -> None:
        self.lines.append(line)
        self.timestamps.append((step, datetime.now(timezone.utc).isoformat()))
        if self.path is not None:
            with self.path.open("a", encoding="utf-8") as fh:
                fh.write(line + "\n")

    def graphs(self) -> list[tuple[int, CausalGraph]]:
        return [_parse(line) for line in self.lines]


def graph_snapshot(graph: CausalGraph, step: int, stream: SnapshotStream | None = None) -> str:
    """Serialize ``graph`` at training step ``step``, appending it to ``stream`` if given."""
    line = json.dumps({"step": int(step), **graph.to_dict()},
                      ensure_ascii=False, separators=(",", ":"))
    if stream is not None:
        stream.append(line, step)
        logger.debug("Snapshot at step %d: %s", step, sorted(graph.edge_strings()))
    return line


def _parse(line: str) -> tuple[int, CausalGraph]:
    try:
        data = json.loads(line)
        return int(data["step"]), CausalGraph.from_dict(data)
    except (KeyError, TypeError, ValueError) as e:
        raise GraphError(f"malformed snapshot line: {e}") from e


def read_snapshots(path: str | Path) -> list[tuple[int, CausalGraph]]:
    text = Path(path).read_text(encoding="utf-8")
    return [_parse(line) for line in text.splitlines() if line.strip()]


def edge_diff(before: CausalGraph, after: CausalGraph) -> tuple[list[str], list[str]]:
    """(removed, added) rendered edges; a reorientation shows as one of each."""
    old, new = before.edge_strings(), after.edge_strings()
    return sorted(old - new), sorted(new - old)


def render_timeline(snapshots: Iterable[tuple[int, CausalGraph]]) -> list[str]:
    """
    Step-indexed edge changes, e.g. ``step 40: − REL→position``.

    The first snapshot is listed as the initial edge set; identical consecutive
    snapshots produce no lines.
    """
    lines = []
    previous = None
    for step, graph in snapshots:
        if previous is None:
            edges = ", ".join(sorted(graph.edge_strings())) or "(none)"
            lines.append(f"step {step}: initial {edges}")
        else:
            removed, added = edge_diff(previous, graph)
            lines.extend(f"step {step}: − {e}" for e in removed)
            lines.extend(f"step {step}: + {e}" for e in added)
        previous = graph
    return lines
