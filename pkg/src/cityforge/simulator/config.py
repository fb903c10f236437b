"""Simulator configuration: streams, faults, and the city.json schema."""

from __future__ import annotations

from dataclasses import dataclass, field
from datetime import date, datetime, timedelta

from ..errors import ValidationError
from ..timeutil import UTC, format_iso, parse_iso

FAULT_KINDS = ("zeroFlatline", "lowVariability", "spike", "gap")


@dataclass(frozen=True)
class StreamSpec:
    asset_urn: str
    attribute: str
    entity_type: str
    filename: str
    sampling_key: str
    integer: bool


# One entry per generated stream; the three e-field locations share a file.
STREAMS: dict[str, StreamSpec] = {
    "parking": StreamSpec(
        "urn:oc:entity:santander:parking:p-total", "availableSpots", "parking",
        "parking.csv", "parking", True,
    ),
    "efield1": StreamSpec(
        "urn:oc:entity:santander:efield:efield1", "fieldStrength", "efield",
        "efield.csv", "efield", False,
    ),
    "efield2": StreamSpec(
        "urn:oc:entity:santander:efield:efield2", "fieldStrength", "efield",
        "efield.csv", "efield", False,
    ),
    "efield3": StreamSpec(
        "urn:oc:entity:santander:efield:efield3", "fieldStrength", "efield",
        "efield.csv", "efield", False,
    ),
    "traffic": StreamSpec(
        "urn:oc:entity:santander:traffic:t01", "vehiclesPerHour", "traffic",
        "traffic.csv", "traffic", True,
    ),
    "weather": StreamSpec(
        "urn:oc:entity:santander:weather:w01", "weatherCode", "weather",
        "weather.csv", "weather", True,
    ),
}


def asset_for(stream: str) -> str:
    return STREAMS[stream].asset_urn


@dataclass
class FaultSpec:
    kind: str
    stream: str
    start: datetime
    end: datetime  # half-open interval [start, end)
    magnitude: float | None = None

    def validate(self, range_start: datetime, range_end: datetime) -> None:
        if self.kind not in FAULT_KINDS:
            raise ValidationError(f"unknown fault kind: {self.kind!r}")
        if self.stream not in STREAMS:
            raise ValidationError(f"unknown fault stream: {self.stream!r}")
        if not self.start < self.end:
            raise ValidationError(f"fault start must precede end: {self.kind} on {self.stream}")
        if self.start < range_start or self.end > range_end:
            raise ValidationError(
                f"fault [{format_iso(self.start)}, {format_iso(self.end)}) outside generated range"
            )
        if self.kind == "spike" and self.magnitude is None:
            raise ValidationError("spike faults need a magnitude")

    def to_dict(self) -> dict:
        out = {
            "kind": self.kind,
            "stream": self.stream,
            "start": format_iso(self.start),
            "end": format_iso(self.end),
        }
        if self.magnitude is not None:
            out["magnitude"] = self.magnitude
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "FaultSpec":
        return cls(
            kind=data["kind"],
            stream=data["stream"],
            start=parse_iso(data["start"]),
            end=parse_iso(data["end"]),
            magnitude=data.get("magnitude"),
        )


_DEFAULT_SAMPLING = {"parking": 600, "efield": 600, "traffic": 3600, "weather": 3600}
_DEFAULT_NOISE = {"parking": 2.0, "efield": 0.06, "traffic": 60.0}


@dataclass
class CityConfig:
    seed: int = 8
    days: int = 14
    start_date: date = date(2017, 11, 15)
    parking_capacity: int = 120
    sampling_seconds: dict = field(default_factory=lambda: dict(_DEFAULT_SAMPLING))
    coupling_efield_parking: float = 0.8
    winter_traffic_factor: float = 2.0
    winter_parking_factor: float = 2.0
    noise_std: dict = field(default_factory=lambda: dict(_DEFAULT_NOISE))
    faults: list[FaultSpec] = field(default_factory=list)

    def __post_init__(self) -> None:
        if isinstance(self.seed, bool) or not isinstance(self.seed, int) or self.seed < 0:
            raise ValidationError(f"seed must be a non-negative integer, got {self.seed!r}")
        if self.days < 1:
            raise ValidationError("days must be >= 1")
        if self.parking_capacity <= 0:
            raise ValidationError("parkingCapacity must be > 0")
        if not 0.0 <= self.coupling_efield_parking <= 1.0:
            raise ValidationError("couplingEfieldParking must be in [0, 1]")
        if self.winter_traffic_factor <= 0 or self.winter_parking_factor <= 0:
            raise ValidationError("winter factors must be > 0")
        merged = dict(_DEFAULT_SAMPLING)
        merged.update(self.sampling_seconds)
        self.sampling_seconds = merged
        for key, seconds in self.sampling_seconds.items():
            if not (isinstance(seconds, int) and seconds > 0 and 86400 % seconds == 0):
                raise ValidationError(f"sampling for {key!r} must divide 86400, got {seconds!r}")
        noise = dict(_DEFAULT_NOISE)
        noise.update(self.noise_std)
        self.noise_std = noise
        for key, std in self.noise_std.items():
            if std < 0:
                raise ValidationError(f"noiseStd for {key!r} must be >= 0")
        for fault in self.faults:
            fault.validate(self.range_start, self.range_end)

    @property
    def range_start(self) -> datetime:
        return datetime(self.start_date.year, self.start_date.month, self.start_date.day, tzinfo=UTC)

    @property
    def range_end(self) -> datetime:
        return self.range_start + timedelta(days=self.days)

    def to_dict(self) -> dict:
        return {
            "seed": self.seed,
            "days": self.days,
            "startDate": self.start_date.isoformat(),
            "parkingCapacity": self.parking_capacity,
            "samplingSeconds": dict(self.sampling_seconds),
            "couplingEfieldParking": self.coupling_efield_parking,
            "winterTrafficFactor": self.winter_traffic_factor,
            "winterParkingFactor": self.winter_parking_factor,
            "noiseStd": dict(self.noise_std),
            "faults": [fault.to_dict() for fault in self.faults],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "CityConfig":
        data = dict(data or {})
        kwargs = {}
        if "seed" in data:
            kwargs["seed"] = data["seed"]
        if "days" in data:
            kwargs["days"] = data["days"]
        if "startDate" in data:
            kwargs["start_date"] = date.fromisoformat(data["startDate"])
        if "parkingCapacity" in data:
            kwargs["parking_capacity"] = data["parkingCapacity"]
        if "samplingSeconds" in data:
            kwargs["sampling_seconds"] = dict(data["samplingSeconds"])
        if "couplingEfieldParking" in data:
            kwargs["coupling_efield_parking"] = data["couplingEfieldParking"]
        if "winterTrafficFactor" in data:
            kwargs["winter_traffic_factor"] = data["winterTrafficFactor"]
        if "winterParkingFactor" in data:
            kwargs["winter_parking_factor"] = data["winterParkingFactor"]
        if "noiseStd" in data:
            kwargs["noise_std"] = dict(data["noiseStd"])
        if "faults" in data:
            kwargs["faults"] = [FaultSpec.from_dict(f) for f in data["faults"]]
        return cls(**kwargs)
