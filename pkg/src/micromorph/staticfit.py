"""Stage-one identification of the static parameters by constrained
least squares on total energies.

The five unknowns theta = (mu_micro, mus_micro, lam_micro, mu_c, mu_lc2)
are updated by Gauss-Newton steps on the energy residuals over all load
cases and specimen sizes, clipped to the admissible region

    mu_micro > mu_macro, mus_micro > mus_macro,
    (lam + mu)_micro > (lam + mu)_macro, mu_c >= 0, mu_lc2 > 0

via the maximum step size rule (h(x) = x for x > 0 else 1) and refined by
a bracketed line search.  A parameter sitting on its boundary with an
outward update is frozen for the current iteration and re-enters the next
one.  The optimizer is evaluator-agnostic: the finite-element evaluator
and the network surrogate implement the same two-method interface.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize_scalar

from .fem import AffineLoadCase, RmmOperator, theta_to_params
from .geometry import solid_square_cell
from .homogenize import EnergyTable
from .mesh import build_mesh
from .tensors import TetragonalElasticity

__all__ = [
    "StaticFitProblem",
    "FitReport",
    "RankDeficiencyError",
    "FemEnergyEvaluator",
    "gauss_newton_step",
    "beta_max",
    "line_search",
    "fit_static",
]

THETA_LABELS = ("mu_micro", "mus_micro", "lam_micro", "mu_c", "mu_lc2")


class RankDeficiencyError(RuntimeError):
    """The least-squares system has (numerically) dependent columns."""

    def __init__(self, message, null_space=None):
        super().__init__(message)
        self.null_space = null_space


@dataclass(frozen=True)
class StaticFitProblem:
    """Targets and configuration of one static identification run."""

    targets: EnergyTable
    c_macro: TetragonalElasticity
    start: np.ndarray  # admissible theta 5-vector
    cell_l: float
    resolution: int = 20
    order: int = 2
    loads: tuple = None
    mu_c_floor: float | None = None  # pin mu_c to this value, excluded from fit
    max_iterations: int = 200
    r2_rel_tol: float = 1e-8

    def __post_init__(self):
        if self.loads is None:
            object.__setattr__(self, "loads", AffineLoadCase.standard_cases(0.01))
        start = np.asarray(self.start, dtype=float)
        object.__setattr__(self, "start", start)
        theta_to_params(start, self.c_macro).require_admissible()
        if not np.all(np.isfinite(self.targets.energies)) or np.any(
            self.targets.energies <= 0.0
        ):
            raise ValueError("target energies must be finite and positive")

    @property
    def sizes(self):
        return self.targets.sizes

    def target_vector(self) -> np.ndarray:
        """Energies ordered (load case outer, size inner)."""
        out = []
        for load in self.loads:
            for n in self.sizes:
                out.append(self.targets.energy(load.label, n))
        return np.asarray(out)

    def parameter_scales(self) -> np.ndarray:
        """Diagonal scaling bringing all five parameters to unit order."""
        c = self.c_macro
        return np.array(
            [c.mu, c.mu_star, c.lam + c.mu, c.mu, c.mu * self.cell_l**2]
        )


@dataclass
class FitReport:
    theta: np.ndarray
    r2: float
    r2_history: list = field(default_factory=list)
    beta_history: list = field(default_factory=list)
    active_constraints: list = field(default_factory=list)
    row_labels: list = field(default_factory=list)
    row_errors: np.ndarray = None  # (Pi_het - Pi) / Pi_het per row
    average_error: float = None  # mean |dPi| / Pi_het, mirrors the summary tables
    iterations: int = 0
    converged: bool = False
    stop_reason: str = ""
    unidentifiable: list = field(default_factory=list)
    wall_time: float = 0.0

    def to_dict(self, include_timing: bool = False) -> dict:
        out = {
            "theta": {k: float(v) for k, v in zip(THETA_LABELS, self.theta)},
            "r2": float(self.r2),
            "r2_history": [float(v) for v in self.r2_history],
            "beta_history": [float(v) for v in self.beta_history],
            "active_constraints": self.active_constraints,
            "row_labels": self.row_labels,
            "row_errors": [float(v) for v in np.atleast_1d(self.row_errors)],
            "average_error_percent": float(self.average_error),
            "iterations": self.iterations,
            "converged": self.converged,
            "stop_reason": self.stop_reason,
            "unidentifiable": self.unidentifiable,
        }
        if include_timing:
            out["wall_time_s"] = float(self.wall_time)
        return out


class FemEnergyEvaluator:
    """Finite-element energies of the homogeneous micromorphic specimens.

    One cached operator per specimen size; a parameter evaluation costs one
    factorization per size shared across the load cases.
    """

    def __init__(self, problem: StaticFitProblem):
        self.problem = problem
        geometry = solid_square_cell(problem.cell_l)
        self.operators = {
            n: RmmOperator(
                build_mesh(geometry, n_cells=n, resolution=problem.resolution),
                order=problem.order,
                consistent_bc=True,
            )
            for n in problem.sizes
        }

    def energies(self, theta) -> np.ndarray:
        params = theta_to_params(theta, self.problem.c_macro)
        by_size = {
            n: op.solve_cases(params, self.problem.loads)
            for n, op in self.operators.items()
        }
        out = []
        for i, _load in enumerate(self.problem.loads):
            for n in self.problem.sizes:
                out.append(by_size[n][i].energy)
        return np.asarray(out)

    def energies_and_jacobian(self, theta):
        from .fem import coefficient_jacobian

        params = theta_to_params(theta, self.problem.c_macro)
        J = coefficient_jacobian(theta, self.problem.c_macro)
        energies = {}
        grads = {}
        for n, op in self.operators.items():
            sols = op.solve_cases(params, self.problem.loads, with_pieces=True)
            for i, sol in enumerate(sols):
                energies[(i, n)] = sol.energy
                grads[(i, n)] = J.T @ sol.piece_energies
        a = []
        D = []
        for i, _load in enumerate(self.problem.loads):
            for n in self.problem.sizes:
                a.append(energies[(i, n)])
                D.append(grads[(i, n)])
        return np.asarray(a), np.asarray(D)


def gauss_newton_step(
    residuals: np.ndarray,
    jacobian: np.ndarray,
    scales: np.ndarray,
    rcond: float = 1e-10,
) -> np.ndarray:
    """Least-squares increment solving min ||D delta - r||.

    Solved through the SVD of the column-scaled jacobian; a singular value
    below ``rcond`` times the largest signals an unidentifiable parameter
    combination and raises with the offending direction.
    """
    D = jacobian * scales[None, :]
    U, s, Vt = np.linalg.svd(D, full_matrices=False)
    if s[0] == 0.0:
        raise RankDeficiencyError("jacobian is zero", null_space=np.eye(len(scales)))
    small = s < rcond * s[0]
    if np.any(small):
        null = (Vt[small].T * scales[:, None]).T
        null = null / np.linalg.norm(null, axis=1, keepdims=True)
        raise RankDeficiencyError(
            f"rank-deficient least-squares system (singular values {s})",
            null_space=null,
        )
    x = Vt.T @ ((U.T @ residuals) / s)
    return x * scales


def _h(x: float) -> float:
    return x if x > 0.0 else 1.0


def beta_max(
    theta,
    delta,
    c_macro: TetragonalElasticity,
    margin: float = 1e-9,
) -> float:
    """Largest admissible step fraction along ``delta``.

    Evaluates h(-(margin to the constraint)/(step component)) for all five
    admissibility constraints; strict inequalities are backed off by the
    relative ``margin`` so the coupling tensor stays finite.
    """
    mu, mus, lam, mu_c, mu_lc2 = [float(v) for v in theta]
    d_mu, d_mus, d_lam, d_mu_c, d_mu_lc2 = [float(v) for v in delta]

    def ratio(margin_now, step):
        if step == 0.0:
            return 1.0
        return _h(-margin_now / step)

    strict = [
        ratio(mu - c_macro.mu, d_mu),
        ratio(mus - c_macro.mu_star, d_mus),
        ratio((lam + mu) - (c_macro.lam + c_macro.mu), d_lam + d_mu),
        ratio(mu_lc2, d_mu_lc2),
    ]
    loose = [ratio(mu_c, d_mu_c)]
    candidates = [1.0]
    candidates.extend(c * (1.0 - margin) if c < 1.0 else 1.0 for c in strict)
    candidates.extend(min(c, 1.0) for c in loose)
    return min(candidates)


def line_search(cost, beta_limit: float, rel_tol: float = 1e-3, f0: float | None = None):
    """Bracketed scalar minimization of ``cost`` on [0, beta_limit].

    Returns (beta*, cost(beta*)); the endpoints are always candidates, so
    the accepted value never exceeds cost(0) (pass ``f0`` when already
    known to save one evaluation).
    """
    if not 0.0 < beta_limit <= 1.0:
        raise ValueError("beta_limit must lie in (0, 1]")
    res = minimize_scalar(
        cost,
        bounds=(0.0, beta_limit),
        method="bounded",
        options={"xatol": rel_tol * beta_limit},
    )
    candidates = [
        (0.0, cost(0.0) if f0 is None else f0),
        (beta_limit, cost(beta_limit)),
    ]
    if np.isfinite(res.fun):
        candidates.append((float(res.x), float(res.fun)))
    beta, value = min(candidates, key=lambda t: t[1])
    return beta, value


def _boundary_mask(theta, delta, problem: StaticFitProblem, rel: float = 1e-8):
    """Parameters at their admissible boundary with an outward update."""
    c = problem.c_macro
    scales = problem.parameter_scales()
    margins = np.array(
        [
            theta[0] - c.mu,
            theta[1] - c.mu_star,
            (theta[2] + theta[0]) - (c.lam + c.mu),
            theta[3],
            theta[4],
        ]
    )
    at_boundary = margins <= rel * scales
    outward = np.array(
        [
            delta[0] < 0.0,
            delta[1] < 0.0,
            delta[2] + delta[0] < 0.0,
            delta[3] < 0.0,
            delta[4] < 0.0,
        ]
    )
    # constraint 3 couples lam and mu; freeze lam when it binds
    mask = np.zeros(5, dtype=bool)
    for j, name in enumerate(THETA_LABELS):
        if at_boundary[j] and outward[j]:
            mask[j] = True
    return mask


def fit_static(problem: StaticFitProblem, evaluator=None, log=None) -> FitReport:
    """Run the constrained Gauss-Newton/line-search loop to convergence."""
    t0 = time.perf_counter()
    if evaluator is None:
        evaluator = FemEnergyEvaluator(problem)
    log = log if log is not None else (lambda msg: None)

    a_het = problem.target_vector()
    scales = problem.parameter_scales()
    theta = problem.start.copy()
    pinned = np.zeros(5, dtype=bool)
    if problem.mu_c_floor is not None:
        theta[3] = problem.mu_c_floor
        pinned[3] = True

    report = FitReport(theta=theta.copy(), r2=np.inf)
    report.row_labels = [
        f"{load.label},n={n}" for load in problem.loads for n in problem.sizes
    ]
    stall_count = 0
    flat_count = 0
    r2_prev = None

    for iteration in range(problem.max_iterations):
        a, D = evaluator.energies_and_jacobian(theta)
        r = a_het - a
        r2 = float(r @ r)
        report.r2_history.append(r2)
        if r2_prev is not None and r2 > r2_prev * (1 + 1e-12):
            # line search guarantees non-increase; guard against drift
            log(f"iteration {iteration}: r2 increased unexpectedly")
        r2_prev = r2

        free = ~pinned
        try:
            delta_free = gauss_newton_step(r, D[:, free], scales[free])
        except RankDeficiencyError as exc:
            directions = [
                {
                    THETA_LABELS[j]: float(v)
                    for j, v in zip(np.nonzero(free)[0], row)
                }
                for row in np.atleast_2d(exc.null_space)
            ]
            report.unidentifiable.extend(directions)
            log(f"iteration {iteration}: {exc}; truncating null directions")
            D_scaled = D[:, free] * scales[free][None, :]
            x, *_ = np.linalg.lstsq(D_scaled, r, rcond=1e-10)
            delta_free = x * scales[free]
        delta = np.zeros(5)
        delta[free] = delta_free

        frozen = _boundary_mask(theta, delta, problem) & free
        if np.any(frozen):
            names = [THETA_LABELS[j] for j in np.nonzero(frozen)[0]]
            report.active_constraints.append(
                {"iteration": iteration, "frozen": names}
            )
            still_free = free & ~frozen
            if not np.any(still_free):
                report.stop_reason = "all parameters frozen at their boundaries"
                break
            delta = np.zeros(5)
            try:
                delta[still_free] = gauss_newton_step(
                    r, D[:, still_free], scales[still_free]
                )
            except RankDeficiencyError:
                D_scaled = D[:, still_free] * scales[still_free][None, :]
                x, *_ = np.linalg.lstsq(D_scaled, r, rcond=1e-10)
                delta[still_free] = x * scales[still_free]
        if theta[3] == 0.0 and not pinned[3] and delta[3] < 0.0:
            log("update prefers negative mu_c; constrained to zero")

        if not np.any(delta):
            report.stop_reason = "zero update direction"
            break
        limit = beta_max(theta, delta, problem.c_macro)

        def cost(beta):
            trial = theta + beta * delta
            e = evaluator.energies(trial)
            res = a_het - e
            return float(res @ res)

        beta, r2_new = line_search(cost, limit, f0=r2)
        report.beta_history.append(beta)
        if beta == 0.0:
            stall_count += 1
            if stall_count >= 2:
                report.stop_reason = "stagnated (two zero line-search steps)"
                break
            continue
        stall_count = 0
        theta = theta + beta * delta

        rel_drop = abs(r2 - r2_new) / max(r2, 1e-300)
        if rel_drop < problem.r2_rel_tol:
            flat_count += 1
            if flat_count >= 3:
                report.stop_reason = "relative r2 change below tolerance"
                break
        else:
            flat_count = 0
    else:
        report.stop_reason = "iteration limit reached"

    a_final = evaluator.energies(theta)
    r_final = a_het - a_final
    report.theta = theta
    report.r2 = float(r_final @ r_final)
    report.r2_history.append(report.r2)
    report.row_errors = r_final / a_het
    report.average_error = float(np.mean(np.abs(r_final) / a_het)) * 100.0
    report.iterations = len(report.beta_history)
    report.converged = report.stop_reason in (
        "relative r2 change below tolerance",
        "stagnated (two zero line-search steps)",
        "zero update direction",
    )
    report.wall_time = time.perf_counter() - t0
    return report
