"""Time integration of the regularized full collision equation.

The density part of the state evolves under the quadratic-plus-linear
collision operator with the kernel tapered to a compact energy window
(index n); an optional origin atom is carried as a passive diagnostic
since the tapered kernel vanishes at zero energy.  Mass is conserved by
pairwise antisymmetric flux assembly, so the drift over a run is pure
floating-point roundoff.  Diagnostics cover the exponential-moment growth
bound, the entropy/dissipation balance, and the accumulation of mass near
the origin.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .kernel import PhysicalParams, eval_kernel
from .measure import Grid, HybridMeasure, MomentReport, exp_moment
from .truncation import TruncationParams, eval_cutoff, gamma1, gamma2, kernel_bound_constant

__all__ = [
    "StepCollapse",
    "SolverConfig",
    "RegularizedKernel",
    "TrajectoryRecord",
    "DissipationParts",
    "BalanceReport",
    "OriginMassReport",
    "taper",
    "collision_rhs",
    "step",
    "entropy_dissipation",
    "entropy_balance_check",
    "origin_mass_estimate",
    "exp_moment_rate",
    "run_full",
]


class StepCollapse(RuntimeError):
    """Positivity could not be restored above the minimal time step."""


@dataclass(frozen=True)
class SolverConfig:
    """Explicit time-stepping controls."""

    t_end: float
    dt_init: float = 1e-3
    dt_min: float = 1e-8
    dt_max: float = 1e-2
    scheme: str = "rk4"
    positivity_mode: str = "reject_halve"
    mass_tolerance: float = 1e-10
    record_every: int = 1
    track_dissipation: bool = True
    track_origin: bool = True
    eta: float = 0.3
    moment_orders: tuple[float, ...] = (1.0, 2.0, 3.0)

    def __post_init__(self) -> None:
        if not (0.0 < self.dt_min <= self.dt_init <= self.dt_max):
            raise ValueError("need 0 < dt_min <= dt_init <= dt_max")
        if not (self.t_end > 0.0):
            raise ValueError("t_end must be positive")
        if self.scheme not in ("rk4", "euler"):
            raise ValueError("scheme must be 'rk4' or 'euler'")
        if self.positivity_mode != "reject_halve":
            raise ValueError("only reject_halve positivity handling is implemented")
        if self.record_every < 1:
            raise ValueError("record_every must be >= 1")


def taper(n: int, x) -> np.ndarray | float:
    """Compactly supported regularizer bounded by 1/x.

    Equals 1/x on [1/n, n], is supported on [1/(n+1), n+1], and ramps
    linearly to zero on the two flanks (each flank stays below 1/x, with
    equality only at the plateau edge).
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    x_arr = np.asarray(x, dtype=float)
    lo_out, lo_in = 1.0 / (n + 1), 1.0 / n
    hi_in, hi_out = float(n), float(n + 1)
    with np.errstate(divide="ignore"):
        plateau = np.where(x_arr > 0.0, 1.0 / np.where(x_arr > 0.0, x_arr, 1.0), 0.0)
    left = n * (x_arr - lo_out) / (lo_in - lo_out)
    right = (hi_out - x_arr) / n
    out = np.where(
        (x_arr >= lo_in) & (x_arr <= hi_in),
        plateau,
        np.where(
            (x_arr > lo_out) & (x_arr < lo_in),
            left,
            np.where((x_arr > hi_in) & (x_arr < hi_out), right, 0.0),
        ),
    )
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class RegularizedKernel:
    """Tapered kernel table on a grid, with its coupling band.

    ``table[i, j]`` holds cutoff * B * taper(x_i) * taper(x_j); it is
    symmetric, vanishes off the energy window [1/(n+1), n+1], and is
    bounded by cutoff * B/(x y).  ``band`` gives per-row index ranges
    [j_lo, j_hi) outside which the row is zero.
    """

    n: int
    grid: Grid
    table: np.ndarray
    band: np.ndarray
    bound_constant: float
    pp: PhysicalParams
    tp: TruncationParams

    @property
    def coupling(self) -> np.ndarray:
        # quadrature-weighted table, cached on first use
        cached = getattr(self, "_coupling", None)
        if cached is None:
            w = self.grid.weights
            cached = self.table * np.outer(w, w)
            object.__setattr__(self, "_coupling", cached)
        return cached

    @classmethod
    def build(
        cls,
        pp: PhysicalParams,
        tp: TruncationParams,
        grid: Grid,
        n: int,
        tol: float = 1e-10,
    ) -> "RegularizedKernel":
        xs = grid.nodes
        size = xs.size
        tap = np.asarray(taper(n, xs))
        table = np.zeros((size, size))
        raw_x: list[float] = []
        raw_y: list[float] = []
        raw_B: list[float] = []
        for i in range(size):
            if tap[i] == 0.0:
                continue
            lo = gamma1(tp, xs[i])
            hi = gamma2(tp, xs[i])
            for j in range(i, size):
                if xs[j] < lo or xs[j] > hi or tap[j] == 0.0:
                    continue
                phi = eval_cutoff(tp, xs[i], xs[j])
                if phi == 0.0:
                    continue
                B = eval_kernel(pp, xs[i], xs[j], tol).value
                table[i, j] = phi * B * tap[i] * tap[j]
                table[j, i] = table[i, j]
                raw_x.append(xs[i])
                raw_y.append(xs[j])
                raw_B.append(B)
        band = np.zeros((size, 2), dtype=int)
        for i in range(size):
            nz = np.nonzero(table[i])[0]
            band[i] = (nz[0], nz[-1] + 1) if nz.size else (0, 0)
        c_star = kernel_bound_constant(pp, raw_x, raw_y, raw_B)
        return cls(n=n, grid=grid, table=table, band=band, bound_constant=c_star, pp=pp, tp=tp)


def _gain_factors(xs: np.ndarray, u: np.ndarray) -> np.ndarray:
    return (xs * xs + u) * np.exp(-xs)


def collision_rhs(u: np.ndarray, kern: RegularizedKernel) -> np.ndarray:
    """Density rate of change from pairwise exchange.

    The flux matrix is antisymmetrized exactly (F - F^T of floats), so the
    quadrature-weighted rate sums to zero up to accumulation roundoff.
    """
    u = np.asarray(u, dtype=float)
    xs = kern.grid.nodes
    w = kern.grid.weights
    A = _gain_factors(xs, u)
    # P[i, j] = coupling * A_i u_j ; exchange flux F = P - P^T
    P = kern.coupling * np.outer(A, u)
    F = P - P.T
    return F.sum(axis=1) / w


def step(
    u: np.ndarray,
    kern: RegularizedKernel,
    cfg: SolverConfig,
    dt: float,
) -> tuple[np.ndarray, float]:
    """One positivity-guarded explicit step; returns (state, dt actually used).

    A step producing any negative density is rejected and retried with dt
    halved, down to cfg.dt_min; persistent negativity raises StepCollapse.
    """
    u = np.asarray(u, dtype=float)
    while True:
        if cfg.scheme == "euler":
            u_next = u + dt * collision_rhs(u, kern)
        else:
            k1 = collision_rhs(u, kern)
            k2 = collision_rhs(u + 0.5 * dt * k1, kern)
            k3 = collision_rhs(u + 0.5 * dt * k2, kern)
            k4 = collision_rhs(u + dt * k3, kern)
            u_next = u + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if np.all(u_next >= 0.0):
            return u_next, dt
        if dt <= cfg.dt_min:
            raise StepCollapse(f"negative density persists at dt_min={cfg.dt_min}")
        dt = max(0.5 * dt, cfg.dt_min)


@dataclass(frozen=True)
class DissipationParts:
    """Dissipation split by the regular/singular structure of the state."""

    density_density: float
    density_atoms: float
    atoms_atoms: float
    infinite_flags: int

    @property
    def total(self) -> float:
        return 0.5 * self.density_density + self.density_atoms + 0.5 * self.atoms_atoms


def _j(a: np.ndarray, b: np.ndarray) -> tuple[np.ndarray, int]:
    # (a - b)(log a - log b), zero when both arguments vanish; a single
    # vanishing argument would give +inf, which is flagged and excluded.
    both = (a > 0.0) & (b > 0.0)
    one = (a > 0.0) ^ (b > 0.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        vals = np.where(both, (a - b) * (np.log(np.where(both, a, 1.0)) - np.log(np.where(both, b, 1.0))), 0.0)
    return vals, int(np.count_nonzero(one))


def entropy_dissipation(u: HybridMeasure, kern: RegularizedKernel) -> DissipationParts:
    """Nonnegative dissipation of the state under the tapered kernel.

    Pairs where exactly one argument of the log-mean bracket vanishes
    carry an infinite contribution; those are counted in infinite_flags
    and left out of the sums rather than poisoning them.
    """
    xs = kern.grid.nodes
    w = kern.grid.weights
    flags = 0
    d1 = 0.0
    if u.density is not None:
        if u.grid.n != kern.grid.n or not np.array_equal(u.grid.nodes, xs):
            raise ValueError("state grid must match the kernel grid")
        g = u.density
        A = _gain_factors(xs, g)
        a = np.outer(A, g)
        vals, fl = _j(a, a.T)
        flags += fl
        d1 = float(np.sum(kern.table * np.outer(w, w) * vals))
    locs = np.array([x for x, _ in u.atoms])
    masses = np.array([m for _, m in u.atoms])
    d2 = 0.0
    d3 = 0.0
    if locs.size:
        if u.density is not None:
            g = u.density
            for xa, ma in zip(locs, masses):
                b_row = _kernel_row_at(kern, xa)
                a = (xs * xs + g) * np.exp(-xs)
                b = g * math.exp(-xa)
                vals, fl = _j(a, b)
                flags += fl
                d2 += ma * float(np.dot(w, b_row * vals))
        bateval = np.zeros((locs.size, locs.size))
        for i, xa in enumerate(locs):
            for j, xb in enumerate(locs):
                bateval[i, j] = _kernel_point(kern, xa, xb)
        a = np.exp(-locs)[:, None] * np.ones_like(bateval)
        vals, fl = _j(a, a.T)
        flags += fl
        d3 = float(np.sum(bateval * np.outer(masses, masses) * vals))
    return DissipationParts(density_density=d1, density_atoms=d2, atoms_atoms=d3, infinite_flags=flags)


def _kernel_point(kern: RegularizedKernel, x: float, y: float) -> float:
    # tapered kernel off the tabulated grid (atoms sit anywhere)
    if x == 0.0 or y == 0.0:
        return 0.0
    tx = float(np.asarray(taper(kern.n, x)))
    ty = float(np.asarray(taper(kern.n, y)))
    if tx == 0.0 or ty == 0.0:
        return 0.0
    phi = eval_cutoff(kern.tp, x, y)
    if phi == 0.0:
        return 0.0
    return phi * eval_kernel(kern.pp, x, y).value * tx * ty


def _kernel_row_at(kern: RegularizedKernel, x: float) -> np.ndarray:
    return np.array([_kernel_point(kern, x, float(yy)) for yy in kern.grid.nodes])


@dataclass
class TrajectoryRecord:
    """Recorded diagnostics along a run."""

    times: list[float] = field(default_factory=list)
    reports: list[MomentReport] = field(default_factory=list)
    entropy_dissipation: list[float] = field(default_factory=list)
    origin_mass_series: list[float] = field(default_factory=list)
    exp_moment_bound: list[float] = field(default_factory=list)
    states: list[np.ndarray] = field(default_factory=list)

    @property
    def mass_series(self) -> np.ndarray:
        return np.array([r.M0 for r in self.reports])

    @property
    def entropy_series(self) -> np.ndarray:
        return np.array([r.H for r in self.reports])

    def max_mass_drift(self) -> float:
        masses = self.mass_series
        if masses.size == 0:
            return 0.0
        scale = abs(masses[0]) if masses[0] != 0.0 else 1.0
        return float(np.max(np.abs(masses - masses[0])) / scale)


@dataclass(frozen=True)
class BalanceReport:
    """Entropy change against the time-integrated dissipation."""

    entropy_change: float
    integrated_dissipation: float
    residual: float
    tolerance: float
    entropy_monotone: bool
    dissipation_nonnegative: bool

    @property
    def passed(self) -> bool:
        return self.residual <= self.tolerance and self.entropy_monotone and self.dissipation_nonnegative


def entropy_balance_check(traj: TrajectoryRecord, rel_tolerance: float = 1e-4) -> BalanceReport:
    """Check H(t2) - H(t1) = integral of the dissipation (trapezoid in time).

    The dissipation is nonnegative, so the entropy is nondecreasing along
    the flow and grows toward its constrained maximum at equilibrium.
    """
    if len(traj.times) < 2 or len(traj.entropy_dissipation) != len(traj.times):
        raise ValueError("trajectory must record dissipation at every recorded time")
    t = np.asarray(traj.times)
    d = np.asarray(traj.entropy_dissipation)
    h = traj.entropy_series
    integral = float(np.trapezoid(d, t))
    change = float(h[-1] - h[0])
    return BalanceReport(
        entropy_change=change,
        integrated_dissipation=integral,
        residual=abs(change - integral),
        tolerance=rel_tolerance * abs(h[0]),
        entropy_monotone=bool(np.all(np.diff(h) >= -1e-12 * max(1.0, abs(h[0])))),
        dissipation_nonnegative=bool(np.all(d >= 0.0)),
    )


@dataclass(frozen=True)
class OriginMassReport:
    """Mass-below-epsilon estimates and origin-directed flux per epsilon."""

    eps: tuple[float, ...]
    mass_estimates: tuple[float, ...]
    flux_values: tuple[float, ...]
    resolution_flags: tuple[bool, ...]

    @property
    def extrapolated(self) -> float:
        return self.mass_estimates[-1]


def origin_mass_estimate(
    u: HybridMeasure,
    kern: RegularizedKernel,
    eps_list: list[float],
) -> OriginMassReport:
    """Estimate the origin mass by shrinking windows and their inflow.

    For each epsilon the estimate is the measure of [0, epsilon) and the
    flux is the (nonnegative) pairing of the collision exchange against a
    smooth decreasing window of width epsilon.  A window holding fewer
    than three grid nodes is flagged as under-resolved.
    """
    if any(e2 >= e1 for e1, e2 in zip(eps_list, eps_list[1:])):
        raise ValueError("eps_list must be strictly decreasing")
    xs = kern.grid.nodes
    w = kern.grid.weights
    masses = []
    fluxes = []
    flags = []
    g = u.density if u.density is not None else np.zeros_like(xs)
    for eps in eps_list:
        below = math.fsum(m for x, m in u.atoms if x < eps)
        below += float(np.dot(w[xs < eps], g[xs < eps]))
        masses.append(below)
        # window phi(x) = (1 - (x/eps)^2)^2 on [0, eps): decreasing, flat at 0
        s = np.clip(xs / eps, 0.0, 1.0)
        phi = (1.0 - s * s) ** 2
        diff = phi[:, None] - phi[None, :]
        rate = np.exp(-xs)[:, None] - np.exp(-xs)[None, :]
        coupling = kern.table * np.outer(w * g, w * g)
        fluxes.append(0.5 * float(np.sum(coupling * rate * diff)))
        flags.append(bool(np.count_nonzero(xs < eps) < 3))
    return OriginMassReport(
        eps=tuple(eps_list),
        mass_estimates=tuple(masses),
        flux_values=tuple(fluxes),
        resolution_flags=tuple(flags),
    )


def exp_moment_rate(tp: TruncationParams, c_star: float, eta: float) -> float:
    """Growth-rate constant of the exponential moment along the full flow."""
    th = tp.theta
    if not ((1.0 - th) / 2.0 < eta < 0.5):
        raise ValueError("eta must lie in ((1 - theta)/2, 1/2)")
    return c_star / (2.0 * th * th) * (1.0 - th) / (1.0 + th) * eta / (0.5 - eta)


def run_full(
    u0: HybridMeasure,
    pp: PhysicalParams,
    tp: TruncationParams,
    n: int,
    cfg: SolverConfig,
    kern: RegularizedKernel | None = None,
    keep_states: bool = False,
) -> TrajectoryRecord:
    """Integrate the regularized equation from a hybrid initial state.

    Only the density evolves; an origin atom rides along as a diagnostic
    (the tapered kernel cannot move mass at zero energy) and atoms at
    positive energies are rejected.  Records moments, entropy, dissipation,
    origin-mass estimates, and the exponential-moment bound envelope.
    """
    if u0.density is None:
        raise ValueError("the full solver needs a density part")
    if any(x > 0.0 for x, _ in u0.atoms):
        raise ValueError("initial atoms away from the origin are not supported")
    if kern is None:
        kern = RegularizedKernel.build(pp, tp, u0.grid, n)

    c_eta = exp_moment_rate(tp, kern.bound_constant, cfg.eta)
    origin = u0.origin_mass
    eps_ladder = list(u0.grid.nodes[0] * np.array([32.0, 8.0, 2.0]))

    def snapshot(t: float, g: np.ndarray, traj: TrajectoryRecord, x0: float) -> None:
        state = HybridMeasure(
            atoms=([(0.0, origin)] if origin > 0.0 else []), grid=u0.grid, density=g.copy()
        )
        traj.times.append(t)
        traj.reports.append(MomentReport.of(state, cfg.moment_orders, cfg.eta))
        if cfg.track_dissipation:
            traj.entropy_dissipation.append(entropy_dissipation(state, kern).total)
        if cfg.track_origin:
            traj.origin_mass_series.append(
                origin_mass_estimate(state, kern, eps_ladder).extrapolated
            )
        traj.exp_moment_bound.append(math.exp(c_eta * t) * x0)
        if keep_states:
            traj.states.append(g.copy())

    traj = TrajectoryRecord()
    g = u0.density.copy()
    x0 = exp_moment(u0, cfg.eta)
    snapshot(0.0, g, traj, x0)
    t = 0.0
    dt = cfg.dt_init
    steps = 0
    horizon = cfg.t_end * (1.0 - 1e-12)  # slop absorbs step-sum roundoff
    while t < horizon:
        dt = min(dt, cfg.t_end - t)
        g, used = step(g, kern, cfg, dt)
        t += used
        dt = min(cfg.dt_max, max(used, cfg.dt_init))
        steps += 1
        if steps % cfg.record_every == 0 or t >= horizon:
            snapshot(t, g, traj, x0)
    drift = traj.max_mass_drift()
    if drift > cfg.mass_tolerance:
        raise StepCollapse(f"mass drift {drift:.3e} exceeds tolerance {cfg.mass_tolerance:.3e}")
    return traj
