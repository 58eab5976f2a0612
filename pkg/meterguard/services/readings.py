"""
Raw meter readings → daily profiles.

Raw files hold one record per line, ``meter_id code kwh``, where
``code = day_index * 100 + interval`` and interval is the 1-based half-hour
slot (1..48). Files may be gzip-compressed; compression is detected from the
magic bytes, not the file name.

Usage:
    parsed = parse_raw_readings(Path("File1.txt.gz"))
    profiles = regulate_daily(parsed.frame)
"""
import gzip
import logging
import zlib
from dataclasses import dataclass, field
from pathlib import Path
from typing import BinaryIO, NamedTuple, Sequence, Union

import numpy as np
import pandas as pd

from ..utils.common import READINGS_PER_DAY
from ..utils.errors import DataFormatError, ValidationError

logger = logging.getLogger(__name__)

# Mean daily consumption of genuine profiles in the public smart-meter trial data
REFERENCE_NORMAL_MEAN_L1 = 32.05
MALFORMED_ABORT_FRACTION = 0.5
INT64_LIMIT = float(2**63)

_COLUMNS = ["meter_id", "day", "interval", "kwh"]
_NUMBER_LITERALS = {"nan", "+nan", "-nan", "inf", "+inf", "-inf", "infinity", "+infinity", "-infinity"}


class MeterReading(NamedTuple):
    meter_id: int
    day: int
    interval: int
    kwh: float


@dataclass(frozen=True)
class DailyProfile:
    """48 nonnegative half-hourly kWh readings of one meter-day."""

    meter_id: int
    day: int
    readings: np.ndarray = field(repr=False)

    def __post_init__(self):
        values = np.array(self.readings, dtype=np.float64, copy=True)
        if values.shape != (READINGS_PER_DAY,):
            raise ValidationError(f"A daily profile needs {READINGS_PER_DAY} readings, got shape {values.shape}")
        if not np.all(np.isfinite(values)) or np.any(values < 0):
            raise ValidationError(f"Profile {self.meter_id}/{self.day} has negative or non-finite readings")
        values.flags.writeable = False
        object.__setattr__(self, "readings", values)

    @property
    def l1(self) -> float:
        return float(self.readings.sum())


@dataclass
class ParsedReadings:
    frame: pd.DataFrame
    malformed: int
    total_lines: int

    @property
    def readings(self) -> list[MeterReading]:
        return [MeterReading(int(m), int(d), int(i), float(k)) for m, d, i, k in self.frame.itertuples(index=False)]

    def __len__(self) -> int:
        return len(self.frame)


def _read_bytes(source: Union[bytes, str, Path, BinaryIO]) -> bytes:
    try:
        if isinstance(source, (bytes, bytearray)):
            data = bytes(source)
        elif isinstance(source, (str, Path)):
            data = Path(source).read_bytes()
        else:
            data = source.read()
    except OSError as e:
        raise DataFormatError(f"Unreadable readings stream: {e}") from e
    if data[:2] == b"\x1f\x8b":
        try:
            data = gzip.decompress(data)
        except (OSError, EOFError, zlib.error) as e:
            raise DataFormatError(f"Corrupt gzip stream: {e}") from e
    return data


def _empty_frame() -> pd.DataFrame:
    return pd.DataFrame({
        "meter_id": pd.Series(dtype="int64"),
        "day": pd.Series(dtype="int64"),
        "interval": pd.Series(dtype="int64"),
        "kwh": pd.Series(dtype="float64"),
    })


def parse_raw_readings(source: Union[bytes, str, Path, BinaryIO]) -> ParsedReadings:
    """
    Parse raw ``meter_id code kwh`` records.

    Blank lines are ignored. A line is malformed when it does not have exactly
    three fields, the ids are not integers, the reading is not a number or the
    interval is outside 1..48. Negative or non-finite kWh values are kept here
    and rejected by regulate_daily.

    Args:
        source: Raw bytes, a path, or a binary file object (plain or gzip)

    Returns:
        ParsedReadings with a (meter_id, day, interval, kwh) frame and the
        malformed-line count

    Raises:
        DataFormatError: Unreadable stream, or more than half the lines malformed
    """
    text = _read_bytes(source).decode("utf-8", errors="replace")
    lines = pd.Series([line for line in text.splitlines() if line.strip()], dtype="object")
    total = len(lines)
    if total == 0:
        return ParsedReadings(_empty_frame(), malformed=0, total_lines=0)

    parts = lines.str.split()
    shaped = parts.str.len() == 3
    tokens = pd.DataFrame(parts[shaped].tolist(), columns=["meter_id", "code", "kwh"]) if shaped.any() else None

    frame = _empty_frame()
    if tokens is not None:
        ids_ok = tokens["meter_id"].str.fullmatch(r"\d+") & tokens["code"].str.fullmatch(r"\d+")
        # ids and codes past the int64 range are malformed too
        for column in ("meter_id", "code"):
            ids_ok &= pd.to_numeric(tokens[column], errors="coerce") < INT64_LIMIT
        kwh = pd.to_numeric(tokens["kwh"], errors="coerce")
        kwh_ok = kwh.notna() | tokens["kwh"].str.lower().isin(_NUMBER_LITERALS)
        tokens = tokens[ids_ok & kwh_ok]
        kwh = kwh[ids_ok & kwh_ok]
        code = tokens["code"].astype("int64")
        frame = pd.DataFrame({
            "meter_id": tokens["meter_id"].astype("int64"),
            "day": code // 100,
            "interval": code % 100,
            "kwh": kwh.astype("float64"),
        })
        frame = frame[(frame["interval"] >= 1) & (frame["interval"] <= READINGS_PER_DAY)].reset_index(drop=True)

    malformed = total - len(frame)
    if malformed > MALFORMED_ABORT_FRACTION * total:
        raise DataFormatError(
            f"{malformed} of {total} lines are malformed; expected 'meter_id code kwh' records",
        )
    if malformed:
        logger.warning(f"⚠️ Skipped {malformed} malformed lines out of {total}")
    logger.info(f"📥 Parsed {len(frame)} readings")
    return ParsedReadings(frame, malformed=malformed, total_lines=total)


def _as_frame(readings: Union[ParsedReadings, pd.DataFrame, Sequence[MeterReading]]) -> pd.DataFrame:
    if isinstance(readings, ParsedReadings):
        return readings.frame
    if isinstance(readings, pd.DataFrame):
        return readings[_COLUMNS]
    if len(readings) == 0:
        return _empty_frame()
    return pd.DataFrame(list(readings), columns=_COLUMNS)


def regulate_daily(readings: Union[ParsedReadings, pd.DataFrame, Sequence[MeterReading]]) -> list[DailyProfile]:
    """
    Group readings into complete meter-days.

    A meter-day becomes a profile only when each of the 48 intervals appears
    exactly once with a finite, nonnegative reading; anything else is dropped.
    Output is ordered by (meter_id, day) and each profile by interval.
    """
    frame = _as_frame(readings)
    if frame.empty:
        return []

    legal = np.isfinite(frame["kwh"].to_numpy()) & (frame["kwh"].to_numpy() >= 0)
    grouped = frame.assign(legal=legal).groupby(["meter_id", "day"], sort=True)
    summary = grouped.agg(
        rows=("interval", "size"),
        intervals=("interval", "nunique"),
        legal=("legal", "all"),
    )
    keep = summary[(summary["rows"] == READINGS_PER_DAY) & (summary["intervals"] == READINGS_PER_DAY) & summary["legal"]]
    dropped = len(summary) - len(keep)
    if keep.empty:
        logger.warning(f"⚠️ No complete meter-days among {len(summary)} candidates")
        return []

    complete = frame.merge(keep.index.to_frame(index=False), on=["meter_id", "day"])
    matrix = complete.pivot_table(index=["meter_id", "day"], columns="interval", values="kwh", aggfunc="first")
    matrix = matrix.reindex(columns=range(1, READINGS_PER_DAY + 1)).sort_index()

    profiles = [
        DailyProfile(meter_id=int(meter), day=int(day), readings=row)
        for (meter, day), row in zip(matrix.index, matrix.to_numpy(dtype=np.float64))
    ]
    logger.info(f"✅ Regulated {len(profiles)} daily profiles ({dropped} incomplete or illegal meter-days dropped)")
    return profiles


def profiles_matrix(profiles: Sequence[DailyProfile]) -> np.ndarray:
    """Stack profiles into an (N, 48) array."""
    if not profiles:
        return np.zeros((0, READINGS_PER_DAY))
    return np.stack([p.readings for p in profiles])


def mean_l1(profiles: Union[Sequence[DailyProfile], np.ndarray]) -> float:
    matrix = profiles if isinstance(profiles, np.ndarray) else profiles_matrix(profiles)
    if len(matrix) == 0:
        raise ValidationError("Mean L1 of an empty profile set is undefined")
    return float(matrix.sum(axis=1).mean())


def check_reference_mean(profiles: Sequence[DailyProfile], tolerance: float = 0.02) -> dict:
    """
    Compare the mean daily L1 of genuine profiles with the published figure.

    Returns:
        Dict with measured value, reference, relative deviation and pass flag
    """
    measured = mean_l1(profiles)
    deviation = abs(measured - REFERENCE_NORMAL_MEAN_L1) / REFERENCE_NORMAL_MEAN_L1
    passed = deviation <= tolerance
    marker = "✅" if passed else "⚠️"
    logger.info(f"{marker} Normal mean L1 {measured:.2f} kWh vs {REFERENCE_NORMAL_MEAN_L1} ({deviation:.1%} off)")
    return {
        "measured": measured,
        "reference": REFERENCE_NORMAL_MEAN_L1,
        "relative_deviation": deviation,
        "passed": bool(passed),
    }


def load_raw_profiles(path: Union[str, Path]) -> list[DailyProfile]:
    """Parse and regulate one raw readings file."""
    return regulate_daily(parse_raw_readings(Path(path)))
