"""Annual series container, CSV ingestion and airborne-fraction arithmetic."""

from __future__ import annotations

import csv
import io
import math
import re
from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import (
    LengthMismatch,
    MissingColumn,
    NonConsecutiveYears,
    NonNumericCell,
    NonPositiveDenominator,
)

SOURCES = ("GCP", "H&N", "New")
VARIANTS = ("raw", "filter")

_SOURCE_ALIASES = {
    "gcp": "GCP",
    "hn": "H&N",
    "h&n": "H&N",
    "handn": "H&N",
    "hansis": "H&N",
    "new": "New",
}
_VARIANT_ALIASES = {
    "raw": "raw",
    "filter": "filter",
    "filtered": "filter",
    "filt": "filter",
}


@dataclass(frozen=True)
class AnnualSeries:
    """A complete series of one value per consecutive calendar year.

    ``values[t]`` belongs to year ``start_year + t``.
    """

    name: str
    start_year: int
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        arr = np.array(self.values, dtype=float)
        if arr.ndim != 1 or arr.size == 0:
            raise ValueError("values must be a non-empty 1-d sequence")
        if not np.all(np.isfinite(arr)):
            raise ValueError(f"series {self.name!r} contains missing or non-finite values")
        arr.setflags(write=False)
        object.__setattr__(self, "values", arr)
        object.__setattr__(self, "start_year", int(self.start_year))

    @classmethod
    def from_values(cls, values, name="y", start_year=0):
        return cls(name=name, start_year=start_year, values=np.asarray(values, dtype=float))

    def __len__(self):
        return self.values.size

    @property
    def n(self) -> int:
        return self.values.size

    @property
    def years(self) -> np.ndarray:
        return self.start_year + np.arange(self.n)

    def year(self, index: int) -> int:
        return self.start_year + int(index)

    def with_values(self, values, name=None) -> AnnualSeries:
        return AnnualSeries(name=self.name if name is None else name,
                            start_year=self.start_year, values=values)


def as_series(y, name="y") -> AnnualSeries:
    """Accept an AnnualSeries or any 1-d array-like (start year 0)."""
    if isinstance(y, AnnualSeries):
        return y
    return AnnualSeries.from_values(y, name=name)


def parse_label(column: str) -> tuple[str, str] | None:
    """Map a column name such as ``gcp_raw`` or ``H&N filtered`` to (source, variant)."""
    parts = [p for p in re.split(r"[\s_\-.]+", column.strip().lower()) if p]
    if len(parts) != 2:
        return None
    source = _SOURCE_ALIASES.get(parts[0])
    variant = _VARIANT_ALIASES.get(parts[1])
    if source is None or variant is None:
        return None
    return source, variant


@dataclass(frozen=True)
class DatasetBundle:
    """Series read from one file; all members share start year and length.

    ``series`` is keyed by column name in file order. ``labels`` maps the
    columns that could be identified to their (source, variant) pair.
    """

    series: dict[str, AnnualSeries]
    labels: dict[str, tuple[str, str]] = field(default_factory=dict)

    def __post_init__(self):
        lengths = {(s.start_year, s.n) for s in self.series.values()}
        if len(lengths) > 1:
            raise LengthMismatch("bundle members must share start year and length")

    def __getitem__(self, key) -> AnnualSeries:
        if isinstance(key, tuple):
            for col, label in self.labels.items():
                if label == key:
                    return self.series[col]
            raise KeyError(key)
        return self.series[key]

    def __len__(self):
        return len(self.series)

    def ordered(self) -> list[tuple[str, AnnualSeries]]:
        """Members in reporting order: GCP, H&N, New x raw, filter; then the rest."""
        rank = {(s, v): i for i, (s, v) in enumerate((s, v) for s in SOURCES for v in VARIANTS)}
        cols = list(self.series)
        known = sorted((c for c in cols if c in self.labels), key=lambda c: rank[self.labels[c]])
        rest = [c for c in cols if c not in self.labels]
        return [(c, self.series[c]) for c in known + rest]


def _parse_float(text: str, row: int, column: str) -> float:
    s = text.strip()
    try:
        value = float(s)
    except ValueError:
        raise NonNumericCell(f"row {row}, column {column!r}: cannot parse {text!r} as a number") from None
    if not math.isfinite(value):
        raise NonNumericCell(f"row {row}, column {column!r}: {text!r} is not a finite number")
    return value


def read_csv(stream: Iterable[str], columns: Sequence[str] | None = None,
             schema: Mapping[str, tuple[str, str]] | None = None) -> DatasetBundle:
    reader = csv.reader(stream)
    try:
        header = [h.strip() for h in next(reader)]
    except StopIteration:
        raise MissingColumn("file is empty; expected a header row with a 'year' column") from None
    if header:
        header[0] = header[0].lstrip("\ufeff")
    lowered = [h.lower() for h in header]
    if "year" not in lowered:
        raise MissingColumn("no 'year' column in header")
    year_idx = lowered.index("year")

    if columns is None and schema is not None:
        columns = list(schema)
    if columns is None:
        wanted = [h for i, h in enumerate(header) if i != year_idx and h]
        if not wanted:
            raise MissingColumn("no value columns besides 'year'")
    else:
        wanted = list(columns)
        for c in wanted:
            if c not in header:
                raise MissingColumn(f"column {c!r} not found; available: {', '.join(header)}")
    idx = {c: header.index(c) for c in wanted}

    years: list[int] = []
    data: dict[str, list[float]] = {c: [] for c in wanted}
    for lineno, row in enumerate(reader, start=2):
        if not row or all(not cell.strip() for cell in row):
            continue
        if len(row) < len(header):
            row = row + [""] * (len(header) - len(row))
        ytext = row[year_idx].strip()
        try:
            year = int(float(ytext))
            if float(ytext) != year:
                raise ValueError
        except ValueError:
            raise NonNumericCell(f"row {lineno}, column 'year': {ytext!r} is not an integer year") from None
        if years and year != years[-1] + 1:
            raise NonConsecutiveYears(
                f"row {lineno}: year {year} does not follow {years[-1]}; years must be consecutive ascending")
        years.append(year)
        for c in wanted:
            data[c].append(_parse_float(row[idx[c]], lineno, c))
    if not years:
        raise MissingColumn("file has a header but no data rows")

    series = {c: AnnualSeries(name=c, start_year=years[0], values=np.array(v)) for c, v in data.items()}
    if schema is not None:
        labels = {c: tuple(schema[c]) for c in wanted if c in schema}
    else:
        labels = {c: lab for c in wanted if (lab := parse_label(c)) is not None}
    return DatasetBundle(series=series, labels=labels)


def load_csv(path, columns: Sequence[str] | None = None,
             schema: Mapping[str, tuple[str, str]] | None = None) -> DatasetBundle:
    """Read ``year,<col1>,<col2>,...`` into a :class:`DatasetBundle`.

    Parameters
    ----------
    path : path-like
        UTF-8 CSV with one header row.
    columns : sequence of str, optional
        Value columns to load; all non-year columns by default.
    schema : mapping, optional
        Explicit column -> (source, variant) labels. Without it labels are
        inferred from names like ``gcp_raw`` or ``new_filter``.
    """
    with open(Path(path), newline="", encoding="utf-8-sig") as fh:
        return read_csv(fh, columns=columns, schema=schema)


def format_float(x: float) -> str:
    """Shortest repr that round-trips; empty string for NaN."""
    if x is None or (isinstance(x, float) and math.isnan(x)):
        return ""
    return repr(float(x))


def write_csv(dest, header: Sequence[str], rows: Iterable[Sequence]) -> str | None:
    """Write rows as CSV to a path, or return the text when ``dest`` is None."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([format_float(v) if isinstance(v, (float, np.floating)) else v for v in row])
    text = buf.getvalue()
    if dest is None:
        return text
    Path(dest).write_text(text, encoding="utf-8")
    return None


def bundle_to_csv(bundle: DatasetBundle, dest=None) -> str | None:
    members = list(bundle.series.values())
    years = members[0].years
    rows = ([int(y)] + [float(s.values[i]) for s in members] for i, y in enumerate(years))
    return write_csv(dest, ["year"] + list(bundle.series), rows)


def compute_af(growth: AnnualSeries, emissions_total: AnnualSeries, name="af") -> AnnualSeries:
    """Airborne fraction: atmospheric growth divided by total emissions, year by year."""
    if growth.n != emissions_total.n or growth.start_year != emissions_total.start_year:
        raise LengthMismatch(
            f"growth covers {growth.start_year}+{growth.n} years, "
            f"emissions cover {emissions_total.start_year}+{emissions_total.n}")
    denom = emissions_total.values
    bad = np.flatnonzero(denom <= 0)
    if bad.size:
        raise NonPositiveDenominator(int(bad[0]), float(denom[bad[0]]))
    return AnnualSeries(name=name, start_year=growth.start_year, values=growth.values / denom)
