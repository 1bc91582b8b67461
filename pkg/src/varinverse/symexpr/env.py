from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence

TIME = "t"


class EnvError(ValueError):
    pass


@dataclass(frozen=True)
class SymbolEnv:
    """Declared symbols: coordinates (with ``d``-prefixed velocities),
    bound numeric parameters and the reserved time symbol ``t``.

    ``extra`` names additional free symbols accepted by the parser, such as
    accelerations or the unknown multiplier entries used by the search.
    """

    coordinates: tuple
    parameters: Mapping[str, float] = field(default_factory=dict)
    extra: tuple = ()

    def __post_init__(self):
        coords = tuple(self.coordinates)
        object.__setattr__(self, "coordinates", coords)
        object.__setattr__(self, "parameters", dict(self.parameters))
        object.__setattr__(self, "extra", tuple(self.extra))
        if len(set(coords)) != len(coords):
            raise EnvError("coordinate names must be distinct")
        for c in coords:
            if not c.isidentifier():
                raise EnvError(f"bad coordinate name {c!r}")
            if c == TIME:
                raise EnvError("'t' is reserved for time")
            if c in self.parameters:
                raise EnvError(f"{c!r} is both a coordinate and a parameter")
            if c.startswith("d") and c[1:] in coords:
                raise EnvError(f"coordinate {c!r} collides with velocity of {c[1:]!r}")
        for p in self.parameters:
            if p == TIME or p in self.velocities:
                raise EnvError(f"parameter {p!r} collides with a reserved symbol")

    @property
    def n(self) -> int:
        return len(self.coordinates)

    @property
    def velocities(self) -> tuple:
        return tuple("d" + c for c in self.coordinates)

    @property
    def accelerations(self) -> tuple:
        return tuple("dd" + c for c in self.coordinates)

    def symbols(self) -> frozenset:
        return frozenset(
            (TIME,) + self.coordinates + self.velocities + tuple(self.parameters) + self.extra
        )

    def with_extra(self, names: Sequence[str]) -> "SymbolEnv":
        return SymbolEnv(self.coordinates, self.parameters, self.extra + tuple(names))

    def with_accelerations(self) -> "SymbolEnv":
        return self.with_extra(self.accelerations)
