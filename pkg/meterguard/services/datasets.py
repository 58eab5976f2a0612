"""
Labeled Normal/Theft datasets.

Defender and attacker datasets are built from disjoint meter pools; a third
pool of genuine profiles is held out as base profiles for the vanilla
scaling attack and as the normal-consumption reference.

CSV layout: columns ``r01``..``r48`` then ``label`` (normal | theft); a JSON
sidecar with the same stem records seed, counts, scenario mix and provenance.
"""
from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Optional, Sequence, Union

import numpy as np
import pandas as pd

from ..utils.common import READINGS_PER_DAY, atomic_write, derive_rng, round_half_up, write_json
from ..utils.errors import DataFormatError, InsufficientDataError, MissingArtifactError, ValidationError
from .readings import DailyProfile, profiles_matrix
from .theft import TheftKind, apply_to_readings, sample_scenario

logger = logging.getLogger(__name__)

READING_COLUMNS = [f"r{i:02d}" for i in range(1, READINGS_PER_DAY + 1)]
LABEL_NAMES = ("normal", "theft")


@dataclass(frozen=True)
class LabeledDataset:
    """
    Profiles with class indices (0 Normal, 1 Theft).

    ``scenarios`` holds the applied scenario per row ("" for genuine rows)
    when the dataset was built in this process.
    """

    profiles: np.ndarray
    labels: np.ndarray
    provenance: str
    scenarios: tuple[str, ...] = ()
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        profiles = np.asarray(self.profiles, dtype=np.float64).reshape(-1, READINGS_PER_DAY)
        labels = np.asarray(self.labels, dtype=np.int64).reshape(-1)
        if len(profiles) != len(labels):
            raise ValidationError(f"{len(profiles)} profiles but {len(labels)} labels")
        if np.any((labels != 0) & (labels != 1)):
            raise ValidationError("Labels must be 0 (normal) or 1 (theft)")
        if not np.all(np.isfinite(profiles)) or np.any(profiles < 0):
            raise ValidationError("Profiles must be finite and nonnegative")
        if self.scenarios and len(self.scenarios) != len(labels):
            raise ValidationError("One scenario tag per row is required")
        object.__setattr__(self, "profiles", profiles)
        object.__setattr__(self, "labels", labels)

    def __len__(self) -> int:
        return len(self.labels)

    @property
    def one_hot(self) -> np.ndarray:
        """Label rows: Normal = [1, 0], Theft = [0, 1]."""
        out = np.zeros((len(self), 2))
        out[np.arange(len(self)), self.labels] = 1.0
        return out

    @property
    def theft_count(self) -> int:
        return int(self.labels.sum())

    @property
    def normal_count(self) -> int:
        return len(self) - self.theft_count

    def subset(self, index: np.ndarray) -> "LabeledDataset":
        return LabeledDataset(
            profiles=self.profiles[index],
            labels=self.labels[index],
            provenance=self.provenance,
            scenarios=tuple(self.scenarios[i] for i in index) if self.scenarios else (),
            metadata=dict(self.metadata),
        )


@dataclass(frozen=True)
class ProfilePools:
    defender: list[DailyProfile]
    attacker: list[DailyProfile]
    holdout: list[DailyProfile]


def parse_scenario_mix(mix: Union[None, str, Mapping[str, float]]) -> dict[TheftKind, float]:
    """
    Normalize a scenario mix to probabilities.

    Accepts None (uniform over h1..h6), a mapping, or text like "h1:1,h6:2".
    """
    if mix is None or (isinstance(mix, str) and not mix.strip()):
        return {kind: 1.0 / len(TheftKind) for kind in TheftKind}
    if isinstance(mix, str):
        pairs = {}
        for part in mix.split(","):
            name, _, weight = part.partition(":")
            pairs[name.strip()] = float(weight) if weight.strip() else 1.0
        mix = pairs
    try:
        weights = {TheftKind(k): float(v) for k, v in mix.items()}
    except ValueError as e:
        raise ValidationError(f"Invalid scenario mix {mix}: {e}") from e
    total = sum(weights.values())
    if total <= 0 or any(w < 0 for w in weights.values()):
        raise ValidationError(f"Scenario mix weights must be nonnegative with a positive sum: {mix}")
    return {kind: w / total for kind, w in weights.items()}


def build_labeled_dataset(
    profiles: Sequence[DailyProfile],
    total_count: int,
    polluted_fraction: float = 0.5,
    scenario_mix: Union[None, str, Mapping[str, float]] = None,
    seed: int = 0,
    provenance: str = "defender",
) -> LabeledDataset:
    """
    Sample genuine profiles and pollute a fixed share of them.

    Args:
        profiles: Source pool of genuine profiles
        total_count: Rows in the dataset, sampled without replacement
        polluted_fraction: Share of rows turned into theft rows,
            round-half-up(fraction * total) exactly
        scenario_mix: Scenario probabilities (uniform by default)
        seed: Master seed for sampling, scenarios and shuffling
        provenance: "defender" or "attacker"

    Returns:
        Shuffled LabeledDataset with per-row scenario tags

    Raises:
        InsufficientDataError: The pool has fewer than total_count profiles
    """
    if not 0.0 <= polluted_fraction <= 1.0:
        raise ValidationError(f"Polluted fraction must be in [0, 1], got {polluted_fraction}")
    if total_count < 0:
        raise ValidationError(f"total_count must be >= 0, got {total_count}")
    if total_count > len(profiles):
        raise InsufficientDataError(f"Need {total_count} source profiles, only {len(profiles)} available")

    mix = parse_scenario_mix(scenario_mix)
    kinds = list(mix)
    sample_rng = derive_rng(seed, 1)
    scenario_rng = derive_rng(seed, 2)

    chosen = sample_rng.choice(len(profiles), size=total_count, replace=False)
    matrix = profiles_matrix([profiles[i] for i in chosen]).copy()
    labels = np.zeros(total_count, dtype=np.int64)
    scenarios = [""] * total_count

    n_theft = round_half_up(polluted_fraction * total_count)
    drawn = scenario_rng.choice(len(kinds), size=n_theft, p=[mix[k] for k in kinds]) if n_theft else []
    for row, kind_index in enumerate(drawn):
        scenario = sample_scenario(kinds[kind_index], scenario_rng)
        matrix[row] = apply_to_readings(matrix[row], scenario, scenario_rng)
        labels[row] = 1
        scenarios[row] = scenario.describe()

    order = sample_rng.permutation(total_count)
    counts = {kind.value: int(sum(1 for k in drawn if kinds[k] is kind)) for kind in kinds}
    dataset = LabeledDataset(
        profiles=matrix[order],
        labels=labels[order],
        provenance=provenance,
        scenarios=tuple(scenarios[i] for i in order),
        metadata={
            "seed": seed,
            "provenance": provenance,
            "total": total_count,
            "theft": n_theft,
            "normal": total_count - n_theft,
            "polluted_fraction": polluted_fraction,
            "scenario_mix": {k.value: p for k, p in mix.items()},
            "scenario_counts": counts,
        },
    )
    logger.info(f"✅ Built {provenance} dataset: {total_count} rows, {n_theft} theft")
    return dataset


def split_dataset(dataset: LabeledDataset, test_fraction: float = 0.2, seed: int = 0) -> tuple[LabeledDataset, LabeledDataset]:
    """
    Seeded random train/test partition.

    The test part has round-half-up(test_fraction * N) rows.
    """
    if not 0.0 < test_fraction < 1.0:
        raise ValidationError(f"Test fraction must be in (0, 1), got {test_fraction}")
    if len(dataset) == 0:
        raise InsufficientDataError("Cannot split an empty dataset")
    order = derive_rng(seed, 3).permutation(len(dataset))
    n_test = round_half_up(test_fraction * len(dataset))
    test, train = order[:n_test], order[n_test:]
    return dataset.subset(train), dataset.subset(test)


def split_pools(profiles: Sequence[DailyProfile], holdout_normals: int, seed: int = 0) -> ProfilePools:
    """
    Partition profiles into defender, attacker and holdout pools by meter id.

    Holdout meters are taken first until at least holdout_normals profiles
    are reserved; the remaining meters are halved by profile count.
    """
    by_meter: dict[int, list[DailyProfile]] = {}
    for profile in profiles:
        by_meter.setdefault(profile.meter_id, []).append(profile)
    meters = np.array(sorted(by_meter), dtype=np.int64)
    meters = meters[derive_rng(seed, 4).permutation(len(meters))]

    holdout: list[DailyProfile] = []
    rest: list[int] = []
    for meter in meters:
        if len(holdout) < holdout_normals:
            holdout.extend(by_meter[int(meter)])
        else:
            rest.append(int(meter))
    if len(holdout) < holdout_normals or not rest:
        raise InsufficientDataError(
            f"{len(profiles)} profiles from {len(meters)} meters cannot fill the holdout and two training pools"
        )

    remaining = sum(len(by_meter[m]) for m in rest)
    defender: list[DailyProfile] = []
    attacker: list[DailyProfile] = []
    for meter in rest:
        target = defender if len(defender) < remaining / 2 else attacker
        target.extend(by_meter[meter])
    logger.info(f"📦 Pools: defender {len(defender)}, attacker {len(attacker)}, holdout {len(holdout)}")
    return ProfilePools(defender=defender, attacker=attacker, holdout=holdout)


def save_dataset(dataset: LabeledDataset, path: Union[str, Path], extra_meta: Optional[dict] = None) -> Path:
    """Write the CSV and its JSON sidecar."""
    path = Path(path)
    frame = pd.DataFrame(dataset.profiles, columns=READING_COLUMNS)
    frame["label"] = [LABEL_NAMES[i] for i in dataset.labels]
    atomic_write(path, lambda tmp: frame.to_csv(tmp, index=False))
    meta = {**dataset.metadata, **(extra_meta or {}), "rows": len(dataset), "provenance": dataset.provenance}
    write_json(path.with_suffix(".json"), meta)
    return path


def load_dataset(path: Union[str, Path]) -> LabeledDataset:
    """Read a dataset CSV (and its sidecar, when present)."""
    path = Path(path)
    if not path.exists():
        raise MissingArtifactError("Dataset", str(path))
    frame = pd.read_csv(path, float_precision="round_trip")
    missing = [c for c in READING_COLUMNS + ["label"] if c not in frame.columns]
    if missing:
        raise DataFormatError(f"{path}: missing columns {missing}")
    bad = sorted(set(frame["label"]) - set(LABEL_NAMES))
    if bad:
        raise DataFormatError(f"{path}: unknown labels {bad}")
    sidecar = path.with_suffix(".json")
    metadata = json.loads(sidecar.read_text(encoding="utf-8")) if sidecar.exists() else {}
    return LabeledDataset(
        profiles=frame[READING_COLUMNS].to_numpy(dtype=np.float64),
        labels=(frame["label"] == "theft").to_numpy().astype(np.int64),
        provenance=metadata.get("provenance", "unknown"),
        metadata=metadata,
    )


def save_profiles(profiles: Sequence[DailyProfile], path: Union[str, Path]) -> Path:
    """Genuine profiles as CSV with meter_id, day and r01..r48."""
    frame = pd.DataFrame(profiles_matrix(profiles), columns=READING_COLUMNS)
    frame.insert(0, "day", [p.day for p in profiles])
    frame.insert(0, "meter_id", [p.meter_id for p in profiles])
    return atomic_write(Path(path), lambda tmp: frame.to_csv(tmp, index=False))


def load_profiles(path: Union[str, Path]) -> list[DailyProfile]:
    path = Path(path)
    if not path.exists():
        raise MissingArtifactError("Profile file", str(path))
    frame = pd.read_csv(path, float_precision="round_trip")
    values = frame[READING_COLUMNS].to_numpy(dtype=np.float64)
    return [
        DailyProfile(meter_id=int(m), day=int(d), readings=row)
        for m, d, row in zip(frame["meter_id"], frame["day"], values)
    ]
