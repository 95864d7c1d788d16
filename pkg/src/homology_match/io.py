"""Correspondence files and run configuration files.

A correspondence file is line-oriented text: ``key: value`` header lines,
then a ``pairs: N`` line followed by exactly ``N`` rows of
``x_ref y_ref x_query y_query [confidence]``.  Lines starting with ``#``
are comments.  Example::

    # homology-match correspondences
    format: homology-match/correspondences
    version: 1
    reference_id: mug/03
    query_id: scene-17
    image_size: 640 480
    gt_epipoles: 0.12 -0.4 0.9 -0.9 0.1 0.4
    pairs: 4
    10.5 20.25 12.0 19.75
    ...

``epipoles`` (externally supplied) and ``gt_epipoles`` (synthetic ground
truth) each hold the six homogeneous components ``e1 e2``.
"""
import configparser
import dataclasses
import math
from pathlib import Path

import numpy as np

from .errors import InputError, ParseError
from .matching import CorrespondenceSet, MatchConfig

FORMAT_NAME = "homology-match/correspondences"
FORMAT_VERSION = 1
MIN_PAIRS = 4


def _floats(text, count, line, path, what):
    parts = text.split()
    if count is not None and len(parts) != count:
        raise ParseError(f"{what}: expected {count} numbers, got {len(parts)}", line, path)
    try:
        values = [float(p) for p in parts]
    except ValueError:
        raise ParseError(f"{what}: not a number in {text!r}", line, path) from None
    if not all(math.isfinite(v) for v in values):
        raise ParseError(f"{what}: coordinates must be finite", line, path)
    return values


def _epipole_pair(values):
    return np.array(values[:3]), np.array(values[3:])


def parse_correspondences(text, path=None):
    """Parse correspondence-file text into a :class:`CorrespondenceSet`."""
    header = {}
    rows = []
    expected = None
    header_lines = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if expected is None:
            key, sep, value = line.partition(":")
            if not sep:
                raise ParseError(f"expected 'key: value' header line, got {line!r}", lineno, path)
            key = key.strip()
            value = value.strip()
            if key in header:
                raise ParseError(f"duplicate header key {key!r}", lineno, path)
            header[key] = value
            header_lines[key] = lineno
            if key == "pairs":
                try:
                    expected = int(value)
                except ValueError:
                    raise ParseError(f"pairs: expected an integer, got {value!r}", lineno, path) from None
                if expected < 0:
                    raise ParseError("pairs: count must be non-negative", lineno, path)
            continue
        if len(rows) >= expected:
            raise ParseError(f"more data rows than the declared {expected} pairs", lineno, path)
        values = _floats(line, None, lineno, path, "pair")
        if len(values) not in (4, 5):
            raise ParseError(f"pair: expected 4 or 5 numbers, got {len(values)}", lineno, path)
        rows.append((lineno, values))

    if "version" not in header:
        raise ParseError("missing 'version' header", None, path)
    if header.get("format", FORMAT_NAME) != FORMAT_NAME:
        raise ParseError(f"unsupported format {header['format']!r}", header_lines["format"], path)
    try:
        version = int(header["version"])
    except ValueError:
        raise ParseError("version must be an integer", header_lines["version"], path) from None
    if version != FORMAT_VERSION:
        raise ParseError(f"unsupported version {version}", header_lines["version"], path)
    if expected is None:
        raise ParseError("missing 'pairs: N' line", None, path)
    if len(rows) != expected:
        raise ParseError(f"declared {expected} pairs but found {len(rows)}", None, path)
    if expected < MIN_PAIRS:
        raise ParseError(f"at least {MIN_PAIRS} correspondences required, got {expected}",
                         header_lines["pairs"], path)
    widths = {len(v) for _, v in rows}
    if len(widths) > 1:
        raise ParseError("either every pair or no pair may carry a confidence", rows[0][0], path)

    data = np.array([v for _, v in rows], dtype=float)
    kwargs = {}
    if "image_size" in header:
        w, h = _floats(header["image_size"], 2, header_lines["image_size"], path, "image_size")
        kwargs["image_size"] = (int(w), int(h))
    for key in ("epipoles", "gt_epipoles"):
        if key in header:
            kwargs[key] = _epipole_pair(_floats(header[key], 6, header_lines[key], path, key))
    try:
        return CorrespondenceSet(
            data[:, 0:2], data[:, 2:4],
            reference_id=header.get("reference_id", "reference"),
            query_id=header.get("query_id", "query"),
            confidence=data[:, 4] if data.shape[1] == 5 else None,
            **kwargs)
    except InputError as exc:
        raise ParseError(str(exc), None, path) from None


def read_correspondences(path):
    path = Path(path)
    try:
        text = path.read_text()
    except (OSError, UnicodeDecodeError) as exc:
        raise ParseError(f"cannot read file: {exc}", None, path) from None
    return parse_correspondences(text, path)


def _num(v):
    return repr(float(v))


def format_correspondences(corr):
    """Serialize a :class:`CorrespondenceSet`; floats use their shortest exact repr."""
    out = ["# homology-match correspondences",
           f"format: {FORMAT_NAME}",
           f"version: {FORMAT_VERSION}",
           f"reference_id: {corr.reference_id}",
           f"query_id: {corr.query_id}"]
    if corr.image_size is not None:
        out.append(f"image_size: {int(corr.image_size[0])} {int(corr.image_size[1])}")
    for key in ("epipoles", "gt_epipoles"):
        value = getattr(corr, key)
        if value is not None:
            out.append(f"{key}: " + " ".join(_num(v) for v in np.concatenate(value)))
    out.append(f"pairs: {len(corr)}")
    for i in range(len(corr)):
        row = [*corr.ref[i], *corr.qry[i]]
        if corr.confidence is not None:
            row.append(corr.confidence[i])
        out.append(" ".join(_num(v) for v in row))
    return "\n".join(out) + "\n"


def write_correspondences(corr, path):
    Path(path).write_text(format_correspondences(corr))


# ---------------------------------------------------------------------------
# run configuration

CONFIG_SECTION = "run"


def _coerce(name, value, default):
    if isinstance(default, bool):
        low = value.strip().lower()
        if low in ("1", "true", "yes", "on"):
            return True
        if low in ("0", "false", "no", "off"):
            return False
        raise ValueError(f"{name}: expected a boolean, got {value!r}")
    if isinstance(default, int):
        return int(value)
    if isinstance(default, float):
        return float(value)
    return value.strip()


def read_config(path, base=MatchConfig()):
    """Read an INI file with a ``[run]`` section of :class:`MatchConfig` fields."""
    parser = configparser.ConfigParser()
    try:
        with open(path) as fh:
            parser.read_file(fh)
    except (OSError, configparser.Error) as exc:
        raise ParseError(f"cannot read config: {exc}", None, path) from None
    if not parser.has_section(CONFIG_SECTION):
        raise ParseError(f"missing [{CONFIG_SECTION}] section", None, path)
    fields = {f.name: getattr(base, f.name) for f in dataclasses.fields(MatchConfig)}
    changes = {}
    for key, value in parser.items(CONFIG_SECTION):
        name = key.replace("-", "_")
        if name not in fields:
            raise ParseError(f"unknown config key {key!r}", None, path)
        try:
            changes[name] = _coerce(name, value, fields[name])
        except ValueError as exc:
            raise ParseError(str(exc), None, path) from None
    try:
        return dataclasses.replace(base, **changes)
    except ValueError as exc:
        raise ParseError(str(exc), None, path) from None


def format_config(config):
    lines = [f"[{CONFIG_SECTION}]"]
    for f in dataclasses.fields(MatchConfig):
        value = getattr(config, f.name)
        if isinstance(value, bool):
            value = "true" if value else "false"
        lines.append(f"{f.name} = {value}")
    return "\n".join(lines) + "\n"
