"""Embedded example datasets and plain-text data ingestion."""

from __future__ import annotations

import hashlib
import re
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from dpdwald.errors import InputError

__all__ = ["NamedDataset", "load_dataset", "BUILTIN", "checksum", "self_test"]


@dataclass(frozen=True)
class NamedDataset:
    name: str
    values: tuple
    source: str
    unit_note: str = ""

    def __post_init__(self):
        if len(self.values) == 0:
            raise InputError(f"dataset {self.name!r} is empty")

    @property
    def array(self) -> np.ndarray:
        return np.array(self.values, dtype=float)

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "values": list(self.values),
            "source": self.source,
            "unit_note": self.unit_note,
        }


BUILTIN = {
    "leukemia": NamedDataset(
        "leukemia",
        (23.0, 7.5, 43.0, 26.0, 60.0, 105.0, 100.0, 170.0, 54.0, 70.0, 94.0, 320.0, 350.0,
         1000.0, 520.0, 1000.0),
        "White blood cell counts of 16 acute myelogenous leukemia patients "
        "(Gross and Clark 1975)",
        "counts divided by 100",
    ),
    "telephone": NamedDataset(
        "telephone",
        (-988.0, -135.0, -78.0, 3.0, 59.0, 83.0, 93.0, 110.0, 189.0, 197.0, 204.0, 229.0,
         289.0, 310.0),
        "Ordered differences of inverse test and control fault rates in 14 matched "
        "pairs of areas (Simpson 1989)",
        "inverse rates, test minus control",
    ),
    "darwin": NamedDataset(
        "darwin",
        (-67.0, -48.0, 6.0, 8.0, 14.0, 16.0, 23.0, 24.0, 28.0, 29.0, 41.0, 49.0, 56.0, 60.0,
         75.0),
        "Height differences of cross- and self-fertilized Zea mays pairs (Darwin 1878)",
        "eighths of an inch, cross minus self",
    ),
}

# sha256 of the comma-joined repr of each value tuple
_CHECKSUMS = {
    "leukemia": "6e1224b8b608aa4f93c3ae030ce846124d93373ca95dac8b2d1c87f7fe13d47d",
    "telephone": "818ecde1f4574458708864aaa2f49dad4af837eea416678afda9815339b856e1",
    "darwin": "a33baa0f07bd2efdfd87063eeab9322baf917b168dc85ca12708a2f1c68081f1",
}


def checksum(values) -> str:
    text = ",".join(repr(float(v)) for v in values)
    return hashlib.sha256(text.encode("ascii")).hexdigest()


def self_test() -> None:
    """Raise :class:`InputError` if an embedded table drifted from its checksum."""
    for name, ds in BUILTIN.items():
        if checksum(ds.values) != _CHECKSUMS[name]:
            raise InputError(f"embedded dataset {name!r} failed its checksum")


_SPLIT = re.compile(r"[,\s]+")


def _parse_text(text: str, origin: str) -> list[float]:
    vals = []
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        for tok in _SPLIT.split(line):
            if not tok:
                continue
            try:
                v = float(tok)
            except ValueError:
                raise InputError(f"{origin}:{lineno}: cannot parse {tok!r} as a number") from None
            if not np.isfinite(v):
                raise InputError(f"{origin}:{lineno}: non-finite value {tok!r}")
            vals.append(v)
    if not vals:
        raise InputError(f"{origin}: no numeric values found")
    return vals


def load_dataset(name_or_path) -> NamedDataset:
    """Built-in table by name, or a UTF-8 text file of reals.

    Files hold one value per line or comma/whitespace separated values;
    ``#`` starts a comment.
    """
    key = str(name_or_path)
    if key.lower() in BUILTIN:
        return BUILTIN[key.lower()]
    path = Path(key)
    if not path.is_file():
        raise InputError(f"unknown dataset {key!r}: not a built-in name ({sorted(BUILTIN)}) or a file")
    try:
        text = path.read_text(encoding="utf-8")
    except (OSError, UnicodeDecodeError) as exc:
        raise InputError(f"cannot read {key}: {exc}") from exc
    return NamedDataset(path.stem, tuple(_parse_text(text, key)), f"file {path}")
