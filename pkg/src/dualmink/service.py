"""FastAPI service exposing the measures, solver, John ellipsoid and
verification suites.

Requests and responses are the pydantic models from ``schemas``; numerical
degeneracies map to HTTP 422 with a structured detail, bad configurations
to 400, so clients can triage without parsing messages.
"""

from __future__ import annotations

import numpy as np
from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse

from . import __version__
from .bodies import SupportGrid
from .errors import (AmbiguityError, ConfigurationError, DegeneracyError,
                     DualMinkError, InvalidBodyError, NumericalError,
                     UnsupportedRegimeError)
from .john import containment_gaps, john_ellipsoid
from .measures import (cone_volume_measure, dual_curvature_boundary,
                       dual_curvature_radial, equivariance_pushforward,
                       lp_dual_curvature, lp_dual_density,
                       surface_area_measure)
from .plma import monge_ampere_measure_pl
from .schemas import (DegenerationProbeRequest, DensityRequest,
                      DensityResponse, EquivarianceRequest,
                      EquivarianceResponse, EstimateReportModel, JohnRequest,
                      JohnResponse, MeasureRequest, MeasureResponse,
                      PlMongeAmpereRequest, PlMongeAmpereResponse,
                      ProbeResponse, SolveRequest, SolveResponse,
                      SupportGridModel, UniquenessProbeRequest, VerifyRequest)
from .solver import solve
from .sphere import ScalarField, build_geodesic_grid
from .verify import (basic_estimate_suite, c0_suite, degeneration_probe,
                     proposition_suite, uniqueness_probe)


def create_app() -> FastAPI:
    app = FastAPI(title="dualmink", version=__version__)

    @app.exception_handler(DualMinkError)
    async def _dualmink_error(request: Request, exc: DualMinkError):
        if isinstance(exc, (DegeneracyError, NumericalError)):
            status, kind = 422, "degeneracy"
        elif isinstance(exc, UnsupportedRegimeError):
            status, kind = 400, "unsupported_regime"
        elif isinstance(exc, (ConfigurationError, InvalidBodyError, AmbiguityError)):
            status, kind = 400, "configuration"
        else:
            status, kind = 400, "error"
        return JSONResponse(status_code=status,
                            content={"detail": {"kind": kind, "message": str(exc)}})

    @app.get("/healthz")
    def healthz():
        return {"status": "ok", "version": __version__}

    @app.post("/measure", response_model=MeasureResponse)
    def measure(req: MeasureRequest):
        body = req.body.to_body()
        grid = body.grid if isinstance(body, SupportGrid) \
            else build_geodesic_grid(req.level)
        region = req.region.to_region()
        rows = None
        summary: dict = {"measure": req.measure, "p": req.p, "q": req.q}
        if req.measure in ("surface-area", "cone-volume"):
            maker = surface_area_measure if req.measure == "surface-area" \
                else cone_volume_measure
            mu = maker(body, grid)
            total = mu.mass(region)
            summary["total_mass"] = mu.total_mass()
            if hasattr(mu, "values"):
                lo = float(np.min(mu.values))
                hi = float(np.max(mu.values))
                summary["min_density"] = lo
                summary["max_density"] = hi
                summary["lam"] = max(hi, 1.0 / lo) if lo > 0 else None
            if req.include_rows:
                rows = list(mu.rows())
        elif req.measure == "dual-radial":
            total = dual_curvature_radial(body, req.q, region, grid)
        elif req.measure == "dual-boundary":
            total = dual_curvature_boundary(body, req.q, region, grid)
        else:
            total = lp_dual_curvature(body, req.p, req.q, region, grid)
        return MeasureResponse(total=total, summary=summary, rows=rows)

    @app.post("/density", response_model=DensityResponse)
    def density(req: DensityRequest):
        body = req.body.to_body()
        grid = body.grid if isinstance(body, SupportGrid) \
            else build_geodesic_grid(req.level)
        field, lam = lp_dual_density(body, req.p, req.q, grid)
        return DensityResponse(level=grid.level, values=field.values.tolist(),
                               lam=lam)

    @app.post("/solve", response_model=SolveResponse)
    def solve_endpoint(req: SolveRequest):
        config = req.config.to_config()
        grid = build_geodesic_grid(config.level)
        values = req.f.to_values()
        if req.f.level != config.level:
            raise ConfigurationError(
                f"field level {req.f.level} does not match solver level "
                f"{config.level}")
        report = solve(ScalarField(grid, values), req.p, req.q, config)
        return SolveResponse(
            status=report.status, iterations=report.iterations,
            residual_history=list(report.residual_history), lam=report.lam,
            solution=SupportGridModel(level=grid.level,
                                      values=report.u.values.tolist()))

    @app.post("/john", response_model=JohnResponse)
    def john(req: JohnRequest):
        body = req.body.to_body()
        ell = john_ellipsoid(body)
        inner, outer = containment_gaps(body, ell)
        return JohnResponse(center=ell.center.tolist(),
                            half_axes=ell.half_axes.tolist(),
                            axes=ell.axes.tolist(),
                            inner_gap=inner, outer_gap=outer)

    @app.post("/verify/c0", response_model=EstimateReportModel)
    def verify_c0(req: VerifyRequest):
        rep = c0_suite(req.family.to_spec(), req.p, req.q, req.lambda_cap,
                       sup_h_bound=req.sup_h_bound, vol_floor=req.vol_floor)
        return EstimateReportModel(**rep.to_dict())

    @app.post("/verify/basic-estimate", response_model=EstimateReportModel)
    def verify_basic(req: VerifyRequest):
        rep = basic_estimate_suite(req.family.to_spec(), req.p, req.q,
                                   req.lambda_cap,
                                   ratio_spread_cap=req.ratio_spread_cap,
                                   baseline=req.baseline_dir)
        return EstimateReportModel(**rep.to_dict())

    @app.post("/verify/proposition", response_model=EstimateReportModel)
    def verify_proposition(req: VerifyRequest):
        rep = proposition_suite(req.family.to_spec(), req.p, req.q,
                                req.lambda_cap,
                                axis_ratio_floor=req.axis_ratio_floor)
        return EstimateReportModel(**rep.to_dict())

    @app.post("/probe/uniqueness", response_model=ProbeResponse)
    def probe_uniqueness(req: UniquenessProbeRequest):
        grid = build_geodesic_grid(req.f.level)
        rep = uniqueness_probe(ScalarField(grid, req.f.to_values()),
                               req.p, req.q, n_starts=req.n_starts,
                               seed=req.seed, distance_tol=req.distance_tol,
                               solver_tol=req.solver_tol)
        return ProbeResponse(**rep.to_dict())

    @app.post("/probe/degeneration", response_model=ProbeResponse)
    def probe_degeneration(req: DegenerationProbeRequest):
        rep = degeneration_probe(req.p, q=req.q,
                                 thinness_schedule=tuple(req.schedule),
                                 level=req.level,
                                 allow_unsupported=req.allow_unsupported)
        return ProbeResponse(**rep.to_dict())

    @app.post("/equivariance", response_model=EquivarianceResponse)
    def equivariance(req: EquivarianceRequest):
        pair = equivariance_pushforward(req.polytope.to_body(),
                                        np.array(req.phi),
                                        req.region.to_region())
        return EquivarianceResponse(pushforward=pair[0], scaled_original=pair[1])

    @app.post("/pl-monge-ampere", response_model=PlMongeAmpereResponse)
    def pl_monge_ampere(req: PlMongeAmpereRequest):
        value = monge_ampere_measure_pl(
            [(np.array(g), b) for g, b in req.pieces],
            np.array(req.domain), np.array(req.region))
        return PlMongeAmpereResponse(value=value)

    return app
