"""Semantic types and the domain schema programs are checked against."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Optional


@dataclass(frozen=True)
class Type:
    name: str
    elem: Optional["Type"] = None

    def __str__(self) -> str:
        return f"array of {self.elem}" if self.name == "array" else self.name

    @property
    def numeric(self) -> bool:
        return self.name in ("int", "float")


INT = Type("int")
FLOAT = Type("float")
STRING = Type("string")
BOOL = Type("bool")
PRIMITIVES = {"int": INT, "float": FLOAT, "string": STRING, "bool": BOOL}


def array(elem: Type) -> Type:
    return Type("array", elem)


def domain(name: str) -> Type:
    return Type(name)


@dataclass(frozen=True)
class FieldSpec:
    type: Type
    attr: str
    optional: bool = False


@dataclass(frozen=True)
class Schema:
    version: str
    types: Mapping[str, Mapping[str, FieldSpec]]

    def field(self, type_name: str, name: str) -> Optional[FieldSpec]:
        return self.types.get(type_name, {}).get(name)


def _weather_fields() -> dict:
    fields = {"time": FieldSpec(INT, "time")}
    for name in ("tmpc", "dwpc", "smps", "drct", "vsby", "roadtmpc", "srad", "snwd", "pcpn"):
        fields[name] = FieldSpec(FLOAT, name, optional=True)
    fields["wawa"] = FieldSpec(STRING, "wawa")
    fields["ptype"] = FieldSpec(STRING, "ptype")
    return fields


_GRIDS = FieldSpec(array(domain("Grid")), "grids")
_WEATHER = FieldSpec(array(domain("WeatherRecord")), "weather")
_SPEEDS = FieldSpec(array(domain("SpeedRecord")), "speeds")
_VTYPE = FieldSpec(STRING, "vtype")

DEFAULT_SCHEMA = Schema(
    version="boat-transport/1",
    types={
        "County": {
            "countyCode": FieldSpec(STRING, "code"),
            "countyName": FieldSpec(STRING, "name"),
            "grids": _GRIDS,
            "grid": _GRIDS,
        },
        "Grid": {
            "id": FieldSpec(INT, "id"),
            "latitude": FieldSpec(FLOAT, "latitude"),
            "longitude": FieldSpec(FLOAT, "longitude"),
            "location": FieldSpec(domain("Location"), "location"),
            "weatherRoot": FieldSpec(domain("WeatherLink"), "weather_link", optional=True),
            "speedRoot": FieldSpec(domain("SpeedLink"), "speed_link", optional=True),
        },
        "Location": {
            "latitude": FieldSpec(FLOAT, "latitude"),
            "longitude": FieldSpec(FLOAT, "longitude"),
        },
        "WeatherRoot": {"weather": _WEATHER, "weatherRecords": _WEATHER},
        "SpeedRoot": {"speeds": _SPEEDS, "speedRecords": _SPEEDS},
        "WeatherRecord": _weather_fields(),
        "SpeedRecord": {
            "time": FieldSpec(INT, "time"),
            "detectorcode": FieldSpec(STRING, "detectorcode"),
            "type": _VTYPE,
            "vtype": _VTYPE,
            "speed": FieldSpec(FLOAT, "speed"),
            "reference": FieldSpec(FLOAT, "reference"),
            "roadname": FieldSpec(STRING, "roadname"),
        },
        "WeatherLink": {},
        "SpeedLink": {},
    },
)

# name -> (parameter types, result type, lazy-load kind)
BUILTINS = {
    "getweather": ((domain("Grid"), STRING), domain("WeatherRoot"), "weather"),
    "getspeed": ((domain("Grid"), STRING), domain("SpeedRoot"), "speed"),
    "len": ((None,), INT, None),
}
