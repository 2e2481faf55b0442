"""Pydantic models for request/response validation and file payloads.

The same models back the body/field/config file formats and the service
API, so a file written by the CLI is exactly a request payload and vice
versa.
"""

from __future__ import annotations

from typing import Literal, Union

import numpy as np
from pydantic import BaseModel, Field, field_validator

from . import regions
from .bodies import ConvexBody, Ellipsoid, Polytope, SupportGrid
from .solver import InitSpec, SolverConfig
from .sphere import build_geodesic_grid
from .verify import FamilySpec


# ---------------------------------------------------------------------------
# bodies
# ---------------------------------------------------------------------------

class EllipsoidModel(BaseModel):
    type: Literal["ellipsoid"] = "ellipsoid"
    half_axes: list[float] = Field(min_length=3, max_length=3)
    center: list[float] = Field(default=[0.0, 0.0, 0.0], min_length=3, max_length=3)
    axes: list[list[float]] | None = None

    def to_body(self) -> Ellipsoid:
        axes = None if self.axes is None else np.array(self.axes)
        return Ellipsoid(np.array(self.half_axes), center=np.array(self.center),
                         axes=axes)


class PolytopeModel(BaseModel):
    type: Literal["polytope"] = "polytope"
    vertices: list[list[float]] = Field(min_length=4)

    @field_validator("vertices")
    @classmethod
    def _rows_are_points(cls, v):
        for k, row in enumerate(v):
            if len(row) != 3:
                raise ValueError(f"vertices[{k}] must have 3 coordinates")
        return v

    def to_body(self) -> Polytope:
        return Polytope(np.array(self.vertices))


class SupportGridModel(BaseModel):
    type: Literal["support_grid"] = "support_grid"
    level: int = Field(ge=0, le=7)
    values: list[float]

    def to_body(self) -> SupportGrid:
        return SupportGrid(build_geodesic_grid(self.level), np.array(self.values))


BodyModel = Union[EllipsoidModel, PolytopeModel, SupportGridModel]


def body_adapter():
    """TypeAdapter for BodyModel that discriminates on the 'type' tag."""
    from typing import Annotated

    from pydantic import TypeAdapter

    return TypeAdapter(Annotated[BodyModel, Field(discriminator="type")])


def body_to_model(body: ConvexBody) -> BodyModel:
    if isinstance(body, Ellipsoid):
        return EllipsoidModel(half_axes=body.half_axes.tolist(),
                              center=body.center.tolist(),
                              axes=body.axes.tolist())
    if isinstance(body, Polytope):
        return PolytopeModel(vertices=body.vertices.tolist())
    return SupportGridModel(level=body.grid.level, values=body.values.tolist())


# ---------------------------------------------------------------------------
# fields and regions
# ---------------------------------------------------------------------------

class FieldModel(BaseModel):
    type: Literal["field"] = "field"
    level: int = Field(ge=0, le=7)
    values: list[float] | None = None
    constant: float | None = None

    def to_values(self) -> np.ndarray:
        grid = build_geodesic_grid(self.level)
        if (self.values is None) == (self.constant is None):
            raise ValueError("field needs exactly one of values or constant")
        if self.constant is not None:
            return np.full(grid.n_nodes, self.constant)
        return np.array(self.values)


class CapRegionModel(BaseModel):
    kind: Literal["cap"] = "cap"
    center: list[float] = Field(min_length=3, max_length=3)
    angle: float

    def to_region(self) -> regions.Region:
        c = np.array(self.center) / np.linalg.norm(self.center)
        return regions.Cap(tuple(c), self.angle)


class HemisphereRegionModel(BaseModel):
    kind: Literal["hemisphere"] = "hemisphere"
    center: list[float] = Field(min_length=3, max_length=3)

    def to_region(self) -> regions.Region:
        c = np.array(self.center) / np.linalg.norm(self.center)
        return regions.hemisphere(c)


class FullRegionModel(BaseModel):
    kind: Literal["full"] = "full"

    def to_region(self) -> regions.Region:
        return regions.FullSphere()


class DirectionsRegionModel(BaseModel):
    kind: Literal["directions"] = "directions"
    directions: list[list[float]] = Field(min_length=1)
    tol: float = 1e-9

    def to_region(self) -> regions.Region:
        d = np.array(self.directions)
        d = d / np.linalg.norm(d, axis=1, keepdims=True)
        return regions.DirectionSet(tuple(map(tuple, d)), tol=self.tol)


class UnionRegionModel(BaseModel):
    kind: Literal["union"] = "union"
    parts: list[Union[CapRegionModel, HemisphereRegionModel,
                      FullRegionModel, DirectionsRegionModel]]

    def to_region(self) -> regions.Region:
        return regions.Union(tuple(p.to_region() for p in self.parts))


RegionModel = Union[FullRegionModel, CapRegionModel, HemisphereRegionModel,
                    DirectionsRegionModel, UnionRegionModel]


# ---------------------------------------------------------------------------
# solver and family configuration
# ---------------------------------------------------------------------------

class InitModel(BaseModel):
    kind: Literal["ball", "field", "random"] = "ball"
    radius: float = 1.0
    values: list[float] | None = None
    seed: int = 0
    amplitude: float = 0.05

    def to_spec(self) -> InitSpec:
        values = None if self.values is None else np.array(self.values)
        return InitSpec(kind=self.kind, radius=self.radius, values=values,
                        seed=self.seed, amplitude=self.amplitude)


class SolverConfigModel(BaseModel):
    level: int = Field(default=4, ge=0, le=7)
    tau: float = 1.0
    tol_residual: float = 1e-3
    max_iter: int = 2000
    convexify_every: int = 10
    init: InitModel = InitModel()
    rho_min: float = 1e-3
    tol_convex: float = 1e-6
    allow_unsupported: bool = False

    def to_config(self) -> SolverConfig:
        return SolverConfig(level=self.level, tau=self.tau,
                            tol_residual=self.tol_residual,
                            max_iter=self.max_iter,
                            convexify_every=self.convexify_every,
                            init=self.init.to_spec(), rho_min=self.rho_min,
                            tol_convex=self.tol_convex,
                            allow_unsupported=self.allow_unsupported)


class FamilyModel(BaseModel):
    kind: Literal["ellipsoids", "balls", "perturbed_balls", "solver"]
    count: int = Field(default=8, ge=1)
    seed: int = 0
    level: int = Field(default=4, ge=0, le=7)
    axis_range: tuple[float, float] = (0.7, 1.4)
    amplitude: float = 0.05
    f_amplitude: float = 1.0

    def to_spec(self) -> FamilySpec:
        return FamilySpec(kind=self.kind, count=self.count, seed=self.seed,
                          level=self.level, axis_range=tuple(self.axis_range),
                          amplitude=self.amplitude,
                          f_amplitude=self.f_amplitude)


# ---------------------------------------------------------------------------
# service requests and responses
# ---------------------------------------------------------------------------

MeasureKind = Literal["lp-dual", "dual-radial", "dual-boundary",
                      "surface-area", "cone-volume"]


class MeasureRequest(BaseModel):
    body: BodyModel = Field(discriminator="type")
    measure: MeasureKind = "lp-dual"
    p: float = 0.0
    q: float = 3.0
    region: RegionModel = Field(default=FullRegionModel(), discriminator="kind")
    level: int = Field(default=4, ge=0, le=7)
    include_rows: bool = False


class MeasureResponse(BaseModel):
    total: float
    summary: dict
    rows: list | None = None


class DensityRequest(BaseModel):
    body: BodyModel = Field(discriminator="type")
    p: float
    q: float
    level: int = Field(default=4, ge=0, le=7)


class DensityResponse(BaseModel):
    level: int
    values: list[float]
    lam: float


class SolveRequest(BaseModel):
    f: FieldModel
    p: float
    q: float
    config: SolverConfigModel = SolverConfigModel()


class SolveResponse(BaseModel):
    status: str
    iterations: int
    residual_history: list[float]
    lam: float
    solution: SupportGridModel


class JohnRequest(BaseModel):
    body: BodyModel = Field(discriminator="type")


class JohnResponse(BaseModel):
    center: list[float]
    half_axes: list[float]
    axes: list[list[float]]
    inner_gap: float
    outer_gap: float


class VerifyRequest(BaseModel):
    family: FamilyModel
    p: float
    q: float
    lambda_cap: float = 20.0
    sup_h_bound: float = 10.0
    vol_floor: float | None = None
    ratio_spread_cap: float = 50.0
    axis_ratio_floor: float = 0.05
    baseline_dir: str | None = None


class UniquenessProbeRequest(BaseModel):
    f: FieldModel
    p: float
    q: float
    n_starts: int = Field(default=5, ge=2)
    seed: int = 0
    distance_tol: float = 5e-3
    solver_tol: float = 1e-6


class DegenerationProbeRequest(BaseModel):
    p: float
    q: float = 3.0
    schedule: list[float] = [1.0, 0.5, 0.25, 0.1, 0.05, 0.02]
    level: int = Field(default=4, ge=0, le=7)
    allow_unsupported: bool = False


class EquivarianceRequest(BaseModel):
    polytope: PolytopeModel
    phi: list[list[float]] = Field(min_length=3, max_length=3)
    region: RegionModel = Field(default=FullRegionModel(), discriminator="kind")


class EquivarianceResponse(BaseModel):
    pushforward: float
    scaled_original: float


class PlMongeAmpereRequest(BaseModel):
    pieces: list[tuple[tuple[float, float], float]] = Field(min_length=1)
    domain: list[list[float]] = Field(min_length=3)
    region: list[list[float]] = Field(min_length=3)


class PlMongeAmpereResponse(BaseModel):
    value: float


class ProbeResponse(BaseModel):
    probe: str
    verdict: str
    details: dict
    provenance: dict


class EstimateReportModel(BaseModel):
    suite: str
    rows: list[dict]
    verdict: str
    details: dict
    provenance: dict
