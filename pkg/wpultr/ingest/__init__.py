"""Click log file formats."""

from .base import LogFormat
from .tsv import LogFileHeader, TsvLogFormat, read_log, write_log
from .baidu import BaiduLogFormat, convert

FORMATS = {
    TsvLogFormat.format_name: TsvLogFormat,
    BaiduLogFormat.format_name: BaiduLogFormat,
}

__all__ = [
    "LogFormat",
    "LogFileHeader",
    "TsvLogFormat",
    "BaiduLogFormat",
    "FORMATS",
    "read_log",
    "write_log",
    "convert",
]
