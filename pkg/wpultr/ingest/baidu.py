"""
Best-effort converter for Baidu-ULTR-style TSV exports.

Expected columns (header row, any order): ``qid``, ``did``, ``pos``,
``multimedia_type``, ``serp_height``, ``serp_max_height``, ``click`` and
optionally ``label``, ``freq_bucket``, ``session`` and ``feat_0..feat_k``.

Assumptions, since the public release describes these prosaically:
  * ``pos`` is 1-based; it becomes the ordinal ``position`` feature.
  * ``multimedia_type`` is a 0-based integer code.
  * ``serp_height`` / ``serp_max_height`` are kept in their original units
    (vertical pixels); no rescaling is attempted.
  * an empty ``label`` or ``-1`` means unlabeled.
"""

import logging
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

logger = logging.getLogger(__name__)

COLUMN_MAP = {
    "pos": "position",
    "multimedia_type": "media",
    "serp_height": "height",
    "serp_max_height": "max_height",
}
REQUIRED = ("qid", "did", "pos", "multimedia_type", "serp_height", "serp_max_height", "click")


def _line(i: int) -> int:
    # the header is line 1
    return i + 2


def _numeric(frame: pd.DataFrame, column: str, cast: type) -> pd.Series:
    """Cast one column, naming the first cell that does not parse."""
    try:
        return frame[column].astype(cast)
    except ValueError:
        for i, text in enumerate(frame[column]):
            try:
                cast(text)
            except ValueError:
                raise MalformedRowError(
                    f"expected {'an integer' if cast is int else 'a number'}, got {text!r}",
                    line=_line(i), column=column,
                ) from None
        raise


def _labels(frame: pd.DataFrame, column: str) -> list[int | None]:
    out = []
    for i, value in enumerate(frame[column]):
        if value in ("", "-1", "-"):
            out.append(None)
            continue
        try:
            out.append(int(value))
        except ValueError:
            raise MalformedRowError(
                f"expected an integer label, got {value!r}", line=_line(i), column=column
            ) from None
    return out


class BaiduLogFormat(LogFormat):
    """Maps Baidu-style columns onto the native schema."""

    format_name = "baidu"

    def _do_read(self, path: Path) -> ClickLog:
        frame = pd.read_csv(path, sep="\t", dtype=str, keep_default_na=False)
        missing = [c for c in REQUIRED if c not in frame.columns]
        if missing:
            raise SchemaMismatchError(f"Baidu-style file lacks column(s) {missing}")

        feat_cols = sorted(
            (c for c in frame.columns if c.startswith("feat_")), key=lambda c: int(c[5:])
        )
        positions = _numeric(frame, "pos", int)
        media = _numeric(frame, "multimedia_type", int)
        heights = _numeric(frame, "serp_height", float)
        max_heights = _numeric(frame, "serp_max_height", float)
        clicks = _numeric(frame, "click", int)
        features = (
            pd.concat([_numeric(frame, c, float) for c in feat_cols], axis=1).to_numpy()
            if feat_cols else None
        )

        schema = FeatureSchema((
            FeatureSpec("position", FeatureKind.ORDINAL, max(2, int(positions.max()) if len(frame) else 2)),
            FeatureSpec("media", FeatureKind.CATEGORICAL, max(2, int(media.max()) + 1 if len(frame) else 2)),
            FeatureSpec("height", FeatureKind.CONTINUOUS),
            FeatureSpec("max_height", FeatureKind.CONTINUOUS),
        ))
        labels = _labels(frame, "label") if "label" in frame else [None] * len(frame)
        buckets = _labels(frame, "freq_bucket") if "freq_bucket" in frame else [None] * len(frame)
        sessions = _numeric(frame, "session", int).tolist() if "session" in frame else [0] * len(frame)

        records = []
        for i in range(len(frame)):
            records.append(ImpressionRecord(
                query_id=frame["qid"].iat[i],
                doc_id=frame["did"].iat[i],
                rank_position=int(positions.iat[i]),
                sepp_values={
                    "position": int(positions.iat[i]),
                    "media": int(media.iat[i]),
                    "height": float(heights.iat[i]),
                    "max_height": float(max_heights.iat[i]),
                },
                doc_features=() if features is None else tuple(features[i]),
                click=int(clicks.iat[i]),
                true_relevance=labels[i],
                query_frequency_bucket=buckets[i],
                session_id=sessions[i],
            ))
        logger.info("Converted %d Baidu-style rows", len(records))
        return group_queries(records, schema, doc_feature_dim=len(feat_cols))

    def _do_write(self, log: ClickLog, path: Path) -> None:
        reverse = {v: k for k, v in COLUMN_MAP.items()}
        unknown = [n for n in log.schema.names if n not in reverse]
        if unknown:
            raise SchemaMismatchError(f"no Baidu-style column for feature(s) {unknown}")
        rows = []
        for r in log.records:
            row = {
                "qid": r.query_id,
                "did": r.doc_id,
                "session": r.session_id,
                "click": r.click,
                "label": -1 if r.true_relevance is None else r.true_relevance,
                "freq_bucket": -1 if r.query_frequency_bucket is None else r.query_frequency_bucket,
            }
            for name, value in r.sepp_values.items():
                row[reverse[name]] = value
            for k, value in enumerate(r.doc_features):
                row[f"feat_{k}"] = value
            rows.append(row)
        columns = ["qid", "did", "session", *(reverse[n] for n in log.schema.names),
                   "click", "label", "freq_bucket", *(f"feat_{k}" for k in range(log.doc_feature_dim))]
        frame = pd.DataFrame(rows, columns=columns)
        frame.to_csv(path, sep="\t", index=False, float_format="%.9g", lineterminator="\n")


def convert(src: str | Path, dst: str | Path, source: LogFormat, target: LogFormat) -> ClickLog:
    """Read ``src`` in one format and write it to ``dst`` in another."""
    log = source.read(src)
    target.write(log, dst)
    return log

