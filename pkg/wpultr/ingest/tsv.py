"""
The wpultr TSV log format.

Line 1 is ``#wpultr-log v1``; line 2 declares every column as
``name:kind[:extra]``; each following line is one impression. Unlabeled
grades and missing logged scores are written as ``-``. Floats carry 9
significant digits, doc_features are comma-joined in one column.
"""

import csv
import re
from dataclasses import dataclass
from pathlib import Path

import pandas as pd

from wpultr.core.errors import MalformedRowError, SchemaMismatchError
from wpultr.core.models import (
    ClickLog,
    FeatureKind,
    FeatureSchema,
    FeatureSpec,
    ImpressionRecord,
    group_queries,
)
from wpultr.ingest.base import LogFormat

MAGIC = "#wpultr-log"
VERSION = 1
MISSING = "-"
DATA_START_LINE = 3

RESERVED_KINDS = {
    "query_id": "id",
    "session_id": "int",
    "doc_id": "id",
    "rank_position": "int",
    "click": "binary",
    "true_relevance": "grade",
    "freq_bucket": "int",
    "logged_score": "real",
    "doc_features": "vector",
}
REQUIRED_COLUMNS = frozenset(
    {"query_id", "doc_id", "rank_position", "click", "true_relevance", "freq_bucket", "doc_features"}
)
_LEADING = ("query_id", "session_id", "doc_id", "rank_position")
_TRAILING = ("click", "true_relevance", "freq_bucket", "logged_score")


def format_float(value: float) -> str:
    return f"{value:.9g}"


@dataclass(frozen=True)
class LogFileHeader:
    """Parsed first two lines of a log file."""
    version: int
    schema: FeatureSchema
    doc_feature_dim: int
    columns: tuple[str, ...]

    def render(self) -> str:
        decls = [f"{name}:{RESERVED_KINDS[name]}" for name in _LEADING]
        decls += [spec.declaration() for spec in self.schema]
        decls += [f"{name}:{RESERVED_KINDS[name]}" for name in _TRAILING]
        decls.append(f"doc_features:vector:{self.doc_feature_dim}")
        return f"{MAGIC} v{self.version}\n" + "\t".join(decls) + "\n"

    @classmethod
    def for_log(cls, log: ClickLog) -> "LogFileHeader":
        columns = _LEADING + log.schema.names + _TRAILING + ("doc_features",)
        return cls(VERSION, log.schema, log.doc_feature_dim, columns)

    @classmethod
    def parse(cls, first: str, second: str) -> "LogFileHeader":
        match = re.fullmatch(rf"{MAGIC} v(\d+)", first.rstrip("\r\n"))
        if not match:
            raise MalformedRowError(f"expected '{MAGIC} v{VERSION}'", line=1)
        version = int(match.group(1))
        if version != VERSION:
            raise SchemaMismatchError(f"unsupported log version {version}")

        columns: list[str] = []
        features: list[FeatureSpec] = []
        dim = None
        for decl in second.rstrip("\r\n").split("\t"):
            parts = decl.split(":")
            name = parts[0]
            if name in columns:
                raise SchemaMismatchError(f"duplicate column '{name}' in header")
            columns.append(name)
            if name in RESERVED_KINDS:
                if len(parts) < 2 or parts[1] != RESERVED_KINDS[name]:
                    raise SchemaMismatchError(
                        f"column '{name}' must be declared as {name}:{RESERVED_KINDS[name]}"
                    )
                if name == "doc_features":
                    if len(parts) != 3 or not parts[2].isdigit():
                        raise SchemaMismatchError("doc_features must declare its dimension")
                    dim = int(parts[2])
            else:
                try:
                    features.append(FeatureSpec.parse(decl))
                except ValueError as e:
                    raise SchemaMismatchError(f"bad declaration '{decl}': {e}") from e
        missing = REQUIRED_COLUMNS - set(columns)
        if missing:
            raise SchemaMismatchError(f"header lacks reserved column(s) {sorted(missing)}")
        return cls(version, FeatureSchema(tuple(features)), dim, tuple(columns))


class _RowParser:
    """Cell converters that report the offending line and column."""

    def __init__(self, line: int):
        self.line = line

    def fail(self, column: str, message: str):
        raise MalformedRowError(message, line=self.line, column=column)

    def integer(self, column: str, text: str) -> int:
        try:
            return int(text)
        except ValueError:
            self.fail(column, f"expected an integer, got {text!r}")

    def real(self, column: str, text: str) -> float:
        try:
            return float(text)
        except ValueError:
            self.fail(column, f"expected a number, got {text!r}")

    def click(self, text: str) -> int:
        if text not in ("0", "1"):
            self.fail("click", f"expected 0 or 1, got {text!r}")
        return int(text)

    def optional_int(self, column: str, text: str) -> int | None:
        return None if text == MISSING else self.integer(column, text)

    def optional_real(self, column: str, text: str) -> float | None:
        return None if text == MISSING else self.real(column, text)

    def vector(self, text: str, dim: int) -> tuple[float, ...]:
        values = () if text == "" else tuple(self.real("doc_features", v) for v in text.split(","))
        if len(values) != dim:
            self.fail("doc_features", f"expected {dim} values, got {len(values)}")
        return values

    def feature(self, spec: FeatureSpec, text: str):
        if spec.kind is FeatureKind.CONTINUOUS:
            return self.real(spec.name, text)
        return self.integer(spec.name, text)


class TsvLogFormat(LogFormat):
    """Reader and writer for the native TSV format."""

    format_name = "wpultr"

    def read_header(self, path: Path) -> LogFileHeader:
        with open(path, encoding="utf-8") as f:
            first = f.readline()
            second = f.readline()
        if not second:
            raise MalformedRowError("missing column declarations", line=2)
        return LogFileHeader.parse(first, second)

    def _do_read(self, path: Path) -> ClickLog:
        header = self.read_header(path)
        try:
            frame = pd.read_csv(
                path,
                sep="\t",
                skiprows=2,
                header=None,
                names=list(header.columns),
                dtype=str,
                keep_default_na=False,
                na_filter=False,
                quoting=csv.QUOTE_NONE,
                engine="python",
            )
        except pd.errors.EmptyDataError:
            frame = pd.DataFrame(columns=list(header.columns))
        except pd.errors.ParserError as e:
            match = re.search(r"line (\d+)", str(e))
            line = int(match.group(1)) + 2 if match else None
            raise MalformedRowError(f"wrong number of fields ({e})", line=line) from e

        records = []
        for i, row in enumerate(frame.itertuples(index=False, name=None)):
            line = DATA_START_LINE + i
            cells = dict(zip(header.columns, row))
            parse = _RowParser(line)
            for column, value in cells.items():
                if value is None or (isinstance(value, float) and pd.isna(value)):
                    parse.fail(column, "missing field")
            records.append(ImpressionRecord(
                query_id=cells["query_id"],
                doc_id=cells["doc_id"],
                rank_position=parse.integer("rank_position", cells["rank_position"]),
                sepp_values={s.name: parse.feature(s, cells[s.name]) for s in header.schema},
                doc_features=parse.vector(cells["doc_features"], header.doc_feature_dim),
                click=parse.click(cells["click"]),
                true_relevance=parse.optional_int("true_relevance", cells["true_relevance"]),
                query_frequency_bucket=parse.optional_int("freq_bucket", cells["freq_bucket"]),
                session_id=parse.integer("session_id", cells.get("session_id", "0")),
                logged_score=parse.optional_real("logged_score", cells.get("logged_score", MISSING)),
            ))
        return group_queries(records, header.schema, doc_feature_dim=header.doc_feature_dim)

    def _do_write(self, log: ClickLog, path: Path) -> None:
        header = LogFileHeader.for_log(log)
        with open(path, "w", encoding="utf-8", newline="\n") as f:
            f.write(header.render())
            for record in log.records:
                f.write("\t".join(self._row(log.schema, record)) + "\n")

    @staticmethod
    def _row(schema: FeatureSchema, record: ImpressionRecord) -> list[str]:
        cells = [record.query_id, str(record.session_id), record.doc_id, str(record.rank_position)]
        for spec in schema:
            value = record.sepp_values[spec.name]
            cells.append(format_float(value) if spec.kind is FeatureKind.CONTINUOUS else str(value))
        cells.append(str(record.click))
        cells.append(MISSING if record.true_relevance is None else str(record.true_relevance))
        bucket = record.query_frequency_bucket
        cells.append(MISSING if bucket is None else str(bucket))
        score = record.logged_score
        cells.append(MISSING if score is None else format_float(score))
        cells.append(",".join(format_float(v) for v in record.doc_features))
        return cells


def read_log(path: str | Path) -> ClickLog:
    """Read a TSV log (see module docstring) and validate it."""
    return TsvLogFormat().read(path)


def write_log(log: ClickLog, path: str | Path) -> None:
    """Write a log in the TSV format; byte-identical for identical logs."""
    TsvLogFormat().write(log, path)
