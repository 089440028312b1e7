"""Rate-indexed exponent tables."""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field

SCHEMA = "beeident.curve/1"
UNITS = ("nats", "bits")


@dataclass
class CurveTable:
    """Exponent values over a strictly increasing rate grid.

    ``columns`` maps a column name to one value per rate.  Rates and values
    share the ``units`` tag.
    """

    rates: list[float]
    columns: dict[str, list[float]]
    units: str = "nats"
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.units not in UNITS:
            raise ValueError(f"units must be one of {UNITS}")
        if any(b <= a for a, b in zip(self.rates, self.rates[1:])):
            raise ValueError("rates must be strictly increasing")
        for name, col in self.columns.items():
            if len(col) != len(self.rates):
                raise ValueError(f"column {name!r} has {len(col)} values for {len(self.rates)} rates")

    def __len__(self):
        return len(self.rates)

    def to_units(self, units: str) -> "CurveTable":
        if units == self.units:
            return self
        factor = 1 / math.log(2) if units == "bits" else math.log(2)
        return CurveTable(
            rates=[r * factor for r in self.rates],
            columns={k: [v * factor for v in col] for k, col in self.columns.items()},
            units=units,
            provenance=dict(self.provenance),
        )

    def rows(self):
        names = list(self.columns)
        for i, r in enumerate(self.rates):
            yield [r] + [self.columns[k][i] for k in names]

    def to_dict(self) -> dict:
        return {
            "schema": SCHEMA,
            "units": self.units,
            "columns": ["rate"] + list(self.columns),
            "rows": [[_encode(v) for v in row] for row in self.rows()],
            "provenance": self.provenance,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True, allow_nan=False) + "\n"

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write(f"# schema={SCHEMA} units={self.units}\n")
        buf.write("# config=" + json.dumps(self.provenance, sort_keys=True) + "\n")
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["rate"] + list(self.columns))
        for row in self.rows():
            writer.writerow([repr(float(v)) for v in row])
        return buf.getvalue()

    @classmethod
    def from_dict(cls, obj: dict) -> "CurveTable":
        names = obj["columns"][1:]
        rows = [[_decode(v) for v in r] for r in obj["rows"]]
        return cls(
            rates=[r[0] for r in rows],
            columns={k: [r[i + 1] for r in rows] for i, k in enumerate(names)},
            units=obj["units"],
            provenance=obj.get("provenance", {}),
        )


def _encode(v):
    """Infinite exponents (empty feasible sets) travel as the strings ``"inf"``/``"-inf"``."""
    v = float(v)
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    return v


def _decode(v):
    return float(v) if isinstance(v, str) else v
