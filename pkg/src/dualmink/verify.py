"""Estimate-verification harness.

Turns the a-priori bounds of the theory into reproducible desk-scale
experiment suites: the C^0 suite (sup h and volume bounds under density
caps), the basic-estimate suite (r1 r2 r3 against r3^(3-q+p) for the John
ellipsoid half-axes), the axis-ratio suite (r1/r3 floor), a multi-start
uniqueness probe near the isotropic problem, and an observational
degeneration probe outside the supported exponent regime.

The bounding constants of the theory are not explicit, so suites combine
configured empirical bounds with stored-baseline regression: the first run
against a given configuration records the measured quantities under a
config hash, later runs must reproduce them within a fixed relative band.
Reports carry full provenance (seed, grid level, config hash) and are
bit-for-bit reproducible for a fixed configuration.
"""

from __future__ import annotations

import hashlib
import json
import os
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .bodies import ConvexBody, Ellipsoid, SupportGrid, volume
from .errors import ConfigurationError, UnsupportedRegimeError
from .john import john_ellipsoid
from .measures import lp_dual_density
from .solver import InitSpec, SolverConfig, solve, wulff_support
from .sphere import ScalarField, SphericalGrid, build_geodesic_grid

BASELINE_ENV = "DUALMINK_BASELINE_DIR"
BASELINE_RTOL = 0.01


# ---------------------------------------------------------------------------
# families
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FamilySpec:
    """A seeded family of test bodies.

    kinds: 'ellipsoids' (random half-axes in axis_range, random rotations),
    'balls' (radii in axis_range), 'perturbed_balls' (support grids from
    random low-order perturbations of the unit ball), 'solver' (bodies
    solved from random smooth densities with log2 f uniform in [-1, 1]
    scaled by f_amplitude).
    """

    kind: str
    count: int = 8
    seed: int = 0
    level: int = 4
    axis_range: tuple[float, float] = (0.7, 1.4)
    amplitude: float = 0.05
    f_amplitude: float = 1.0

    def __post_init__(self):
        if self.kind not in ("ellipsoids", "balls", "perturbed_balls", "solver"):
            raise ConfigurationError(f"unknown family kind {self.kind!r}")
        if self.count < 1:
            raise ConfigurationError("family count must be >= 1")
        lo, hi = self.axis_range
        if not (0 < lo <= hi):
            raise ConfigurationError("axis_range must be 0 < lo <= hi")


def _random_rotation(rng: np.random.Generator) -> np.ndarray:
    q, r = np.linalg.qr(rng.normal(size=(3, 3)))
    q *= np.sign(np.diag(r))
    if np.linalg.det(q) < 0:
        q[:, 0] = -q[:, 0]
    return q


def smooth_random_field(grid: SphericalGrid, seed: int) -> np.ndarray:
    """Low-order random spherical polynomial, normalized to sup-norm 1."""
    rng = np.random.default_rng(seed)
    b = rng.normal(size=3)
    a = rng.normal(size=(3, 3))
    a = 0.5 * (a + a.T)
    a -= np.trace(a) / 3.0 * np.eye(3)
    phi = grid.nodes @ b + np.einsum("ij,jk,ik->i", grid.nodes, a, grid.nodes)
    return phi / max(np.abs(phi).max(), 1e-300)


def generate_family(spec: FamilySpec, p: float = 0.0, q: float = 3.5,
                    allow_unsupported: bool = False
                    ) -> tuple[list[tuple[str, ConvexBody]], list[str]]:
    """Bodies of the family, plus ids of members that failed to build."""
    grid = build_geodesic_grid(spec.level)
    rng = np.random.default_rng(spec.seed)
    bodies: list[tuple[str, ConvexBody]] = []
    failures: list[str] = []
    if spec.kind == "ellipsoids":
        lo, hi = spec.axis_range
        for k in range(spec.count):
            half = np.sort(rng.uniform(lo, hi, size=3))
            axes = _random_rotation(rng)
            bodies.append((f"ellipsoid-{k}", Ellipsoid(half, axes=axes)))
    elif spec.kind == "balls":
        lo, hi = spec.axis_range
        radii = np.linspace(lo, hi, spec.count)
        for k, r in enumerate(radii):
            bodies.append((f"ball-{k}", Ellipsoid(np.array([r, r, r]))))
    elif spec.kind == "perturbed_balls":
        for k in range(spec.count):
            phi = smooth_random_field(grid, spec.seed + 1000 + k)
            u = wulff_support(grid, 1.0 + spec.amplitude * phi)
            bodies.append((f"pball-{k}", SupportGrid(grid, u)))
    else:  # solver
        for k in range(spec.count):
            phi = smooth_random_field(grid, spec.seed + 2000 + k)
            f = ScalarField(grid, 2.0 ** (spec.f_amplitude * phi))
            cfg = SolverConfig(level=spec.level, tol_residual=1e-6,
                               allow_unsupported=allow_unsupported)
            rep = solve(f, p, q, cfg)
            if not rep.converged:
                failures.append(f"solved-{k}")
                continue
            bodies.append((f"solved-{k}", SupportGrid(grid, rep.u.values)))
    return bodies, failures


# ---------------------------------------------------------------------------
# report containers
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class EstimateRow:
    body_id: str
    p: float
    q: float
    lam: float
    sup_h: float
    vol: float
    r1: float
    r2: float
    r3: float
    ratio: float                    # r1 r2 r3 / r3^(3 - q + p)
    cor_a: float                    # r3^(q-p) * r1 / r3
    cor_b: float                    # r3
    cor_c: float                    # r1
    retained: bool


@dataclass
class EstimateReport:
    suite: str
    rows: list[EstimateRow]
    verdict: str                    # pass | fail | inconclusive
    details: dict
    provenance: dict

    def retained_rows(self) -> list[EstimateRow]:
        return [r for r in self.rows if r.retained]

    def to_dict(self) -> dict:
        return {
            "suite": self.suite,
            "rows": [asdict(r) for r in self.rows],
            "verdict": self.verdict,
            "details": self.details,
            "provenance": self.provenance,
        }


def config_hash(config: dict) -> str:
    blob = json.dumps(config, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()[:12]


def _provenance(spec: FamilySpec, config: dict) -> dict:
    return {"seed": spec.seed, "level": spec.level, "config_hash": config_hash(config)}


def _suite_rows(family: FamilySpec, p: float, q: float, lam_cap: float
                ) -> tuple[list[EstimateRow], list[str], float]:
    """Rows plus solver failures plus the worst John containment gap
    observed across the family (a per-row spot check of the inscribed
    ellipsoid invariants)."""
    from .john import containment_gaps

    bodies, failures = generate_family(family, p=p, q=q)
    grid = build_geodesic_grid(family.level)
    rows = []
    worst_gap = -np.inf
    for body_id, body in bodies:
        _, lam = lp_dual_density(body, p, q, grid)
        ell = john_ellipsoid(body)
        worst_gap = max(worst_gap, *containment_gaps(body, ell))
        r1, r2, r3 = ell.half_axes
        if isinstance(body, SupportGrid):
            sup_h = float(body.values.max())
        else:
            from .bodies import support_many
            sup_h = float(support_many(body, grid.nodes).max())
        rows.append(EstimateRow(
            body_id=body_id, p=p, q=q, lam=lam, sup_h=sup_h,
            vol=volume(body), r1=float(r1), r2=float(r2), r3=float(r3),
            ratio=float(r1 * r2 * r3 / r3 ** (3.0 - q + p)),
            cor_a=float(r3 ** (q - p) * r1 / r3),
            cor_b=float(r3), cor_c=float(r1),
            retained=bool(lam <= lam_cap)))
    return rows, failures, float(worst_gap)


# ---------------------------------------------------------------------------
# baselines
# ---------------------------------------------------------------------------

def baseline_dir(explicit: str | Path | None = None) -> Path:
    if explicit is not None:
        return Path(explicit)
    env = os.environ.get(BASELINE_ENV)
    if env:
        return Path(env)
    return Path.cwd() / "baselines"


def check_baseline(name: str, config: dict, quantities: dict,
                   directory: str | Path | None = None,
                   rtol: float = BASELINE_RTOL) -> tuple[str, dict]:
    """Compare quantities against the stored baseline for this config.

    Returns (status, details) with status 'created', 'matched' or
    'mismatch'.  The baseline file is keyed by the config hash, so a config
    change starts a fresh baseline instead of failing against a stale one.
    """
    directory = baseline_dir(directory)
    directory.mkdir(parents=True, exist_ok=True)
    path = directory / f"{name}-{config_hash(config)}.json"
    if not path.exists():
        payload = {"config": config, "quantities": quantities}
        path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
        return "created", {"baseline_file": str(path)}
    stored = json.loads(path.read_text())["quantities"]
    deviations = {}
    for key, value in quantities.items():
        ref = stored.get(key)
        if ref is None:
            deviations[key] = "missing in baseline"
            continue
        denom = max(abs(ref), 1e-300)
        dev = abs(value - ref) / denom
        if dev > rtol:
            deviations[key] = dev
    status = "matched" if not deviations else "mismatch"
    return status, {"baseline_file": str(path), "deviations": deviations,
                    "stored": stored}


# ---------------------------------------------------------------------------
# suites
# ---------------------------------------------------------------------------

def c0_suite(family: FamilySpec, p: float, q: float, lam_cap: float,
             sup_h_bound: float = 10.0, vol_floor: float | None = None
             ) -> EstimateReport:
    """Empirical C^0 bounds over bodies retained by the density cap.

    Passes when every retained body has sup h <= sup_h_bound and volume
    >= vol_floor (default 1/sup_h_bound); inconclusive when the cap
    retains nothing.
    """
    if not (0.0 <= p < 1.0 and q > 2.0 + p):
        raise UnsupportedRegimeError("c0 suite requires p in [0,1), q > 2+p")
    if lam_cap <= 1.0:
        raise ConfigurationError("lam_cap must exceed 1")
    vol_floor = 1.0 / sup_h_bound if vol_floor is None else vol_floor
    config = {"suite": "c0", "family": asdict(family), "p": p, "q": q,
              "lam_cap": lam_cap, "sup_h_bound": sup_h_bound,
              "vol_floor": vol_floor}
    rows, failures, gap = _suite_rows(family, p, q, lam_cap)
    retained = [r for r in rows if r.retained]
    details: dict = {"solver_failures": failures, "n_retained": len(retained),
                     "max_containment_gap": gap}
    if not retained:
        verdict = "inconclusive"
    else:
        worst_h = max(r.sup_h for r in retained)
        worst_v = min(r.vol for r in retained)
        details.update({"max_sup_h": worst_h, "min_vol": worst_v})
        verdict = "pass" if worst_h <= sup_h_bound and worst_v >= vol_floor \
            else "fail"
    return EstimateReport("c0", rows, verdict, details, _provenance(family, config))


def basic_estimate_suite(family: FamilySpec, p: float, q: float, lam_cap: float,
                         ratio_spread_cap: float = 50.0,
                         baseline: str | Path | None = None) -> EstimateReport:
    """Spread of r1 r2 r3 / r3^(3-q+p) over retained bodies, with regression.

    The verdict is pass when the max/min ratio spread stays within the
    configured cap and the spread matches the stored baseline within 1%
    (first run creates the baseline).
    """
    if not (0.0 <= p < 1.0 and q > 2.0 + p):
        raise UnsupportedRegimeError("basic estimate requires p in [0,1), q > 2+p")
    config = {"suite": "basic_estimate", "family": asdict(family), "p": p,
              "q": q, "lam_cap": lam_cap, "ratio_spread_cap": ratio_spread_cap}
    rows, failures, gap = _suite_rows(family, p, q, lam_cap)
    retained = [r for r in rows if r.retained]
    details: dict = {"solver_failures": failures, "n_retained": len(retained),
                     "max_containment_gap": gap}
    if not retained:
        return EstimateReport("basic_estimate", rows, "inconclusive", details,
                              _provenance(family, config))
    ratios = np.array([r.ratio for r in retained])
    spread = float(ratios.max() / ratios.min())
    details.update({"ratio_min": float(ratios.min()),
                    "ratio_max": float(ratios.max()),
                    "ratio_spread": spread})
    status, base_details = check_baseline(
        "basic_estimate", config,
        {"ratio_min": float(ratios.min()), "ratio_max": float(ratios.max())},
        directory=baseline)
    details["baseline"] = {"status": status, **base_details}
    verdict = "pass" if spread <= ratio_spread_cap and status != "mismatch" \
        else "fail"
    return EstimateReport("basic_estimate", rows, verdict, details,
                          _provenance(family, config))


def proposition_suite(family: FamilySpec, p: float, q: float, lam_cap: float,
                      axis_ratio_floor: float = 0.05) -> EstimateReport:
    """Roundness check min r1/r3 over retained bodies against a floor."""
    if not (0.0 <= p < 1.0 and q > 2.0 + p):
        raise UnsupportedRegimeError("proposition suite requires p in [0,1), q > 2+p")
    config = {"suite": "proposition", "family": asdict(family), "p": p,
              "q": q, "lam_cap": lam_cap, "axis_ratio_floor": axis_ratio_floor}
    rows, failures, gap = _suite_rows(family, p, q, lam_cap)
    retained = [r for r in rows if r.retained]
    details: dict = {"solver_failures": failures, "n_retained": len(retained),
                     "max_containment_gap": gap}
    if not retained:
        return EstimateReport("proposition", rows, "inconclusive", details,
                              _provenance(family, config))
    ratios = {r.body_id: r.r1 / r.r3 for r in retained}
    min_ratio = min(ratios.values())
    flagged = [bid for bid, val in ratios.items() if val < axis_ratio_floor]
    details.update({"min_axis_ratio": min_ratio,
                    "counterexample_candidates": flagged})
    verdict = "pass" if not flagged else "fail"
    return EstimateReport("proposition", rows, verdict, details,
                          _provenance(family, config))


# ---------------------------------------------------------------------------
# probes
# ---------------------------------------------------------------------------

@dataclass
class ProbeReport:
    probe: str
    verdict: str
    details: dict
    provenance: dict

    def to_dict(self) -> dict:
        return asdict(self)


def uniqueness_probe(f: ScalarField, p: float, q: float, n_starts: int = 5,
                     seed: int = 0, distance_tol: float = 5e-3,
                     max_f_deviation: float = 0.05,
                     max_q_offset: float = 0.25,
                     solver_tol: float = 1e-6) -> ProbeReport:
    """Multi-start agreement probe for the near-isotropic problem.

    Solves from n_starts seeded random initializations and reports the
    pairwise sup-distances; verdict 'pass' when all runs converge and agree
    within distance_tol, 'inconclusive' when any run fails to converge.
    """
    dev = float(np.abs(f.values - 1.0).max())
    if dev > max_f_deviation:
        raise ConfigurationError(
            f"density deviates from 1 by {dev:.3g}, above the probe bound")
    if abs(q - 3.0) > max_q_offset:
        raise ConfigurationError("probe requires q close to 3")
    if not 0.0 <= p < 1.0:
        raise ConfigurationError("probe requires p in [0, 1)")
    config = {"probe": "uniqueness", "p": p, "q": q, "n_starts": n_starts,
              "seed": seed, "distance_tol": distance_tol,
              "level": f.grid.level, "solver_tol": solver_tol}
    solutions, statuses = [], []
    for k in range(n_starts):
        cfg = SolverConfig(level=f.grid.level, tol_residual=solver_tol,
                           init=InitSpec(kind="random", seed=seed + k))
        rep = solve(f, p, q, cfg)
        statuses.append(rep.status)
        if rep.converged:
            solutions.append(rep.u.values)
    details: dict = {"statuses": statuses}
    provenance = {"seed": seed, "level": f.grid.level,
                  "config_hash": config_hash(config)}
    if len(solutions) < n_starts:
        return ProbeReport("uniqueness", "inconclusive", details, provenance)
    dists = [float(np.abs(a - b).max())
             for i, a in enumerate(solutions) for b in solutions[i + 1:]]
    details["max_pairwise_distance"] = max(dists) if dists else 0.0
    verdict = "pass" if max(dists, default=0.0) <= distance_tol else "fail"
    return ProbeReport("uniqueness", verdict, details, provenance)


def degeneration_probe(p: float, q: float = 3.0,
                       thinness_schedule: tuple[float, ...] = (1.0, 0.5, 0.25, 0.1, 0.05, 0.02),
                       level: int = 4,
                       allow_unsupported: bool = False) -> ProbeReport:
    """Observational probe on flattening rotationally symmetric ellipsoids.

    For each thinness t the body is the origin-symmetric ellipsoid with
    half-axes (1, 1, t); the report records the density bound lambda, the
    scale-optimized bound sqrt(sup f / inf f) (the smallest lambda
    achievable by rescaling the body), and the volume.  No pass/fail claim
    is made; the regime p < 0 requires the explicit unsupported flag.
    """
    if p < 0.0 and not allow_unsupported:
        raise UnsupportedRegimeError(
            "the degeneration probe outside p in [0,1) needs allow_unsupported")
    if min(thinness_schedule) <= 0 or max(thinness_schedule) > 1.0:
        raise ConfigurationError("thinness schedule must lie in (0, 1]")
    grid = build_geodesic_grid(level)
    config = {"probe": "degeneration", "p": p, "q": q,
              "schedule": list(thinness_schedule), "level": level}
    rows = []
    for t in thinness_schedule:
        body = Ellipsoid(np.array([1.0, 1.0, t]), rho_min=min(1e-3, t / 2))
        f, lam = lp_dual_density(body, p, q, grid, allow_unsupported=True)
        lam_scaled = float(np.sqrt(f.values.max() / f.values.min()))
        rows.append({"thinness": float(t), "lam": lam,
                     "lam_scale_optimized": lam_scaled,
                     "vol": volume(body)})
    details = {"rows": rows,
               "lam_strictly_increasing": bool(
                   all(a["lam"] < b["lam"] for a, b in zip(rows, rows[1:])))}
    provenance = {"seed": None, "level": level, "config_hash": config_hash(config)}
    return ProbeReport("degeneration", "observational", details, provenance)
