"""Nonnegative measures as atoms plus a grid density, with their functionals.

The universal state of both solvers is a hybrid measure: finitely many
atoms (point masses, possibly one at the origin) together with a density
sampled on a fixed log-spaced grid with trapezoid quadrature weights.
This module provides moments, exponential moments, the physical entropy,
the bounded-Lipschitz distance, the partition of the support into
decoupled blocks, and a lossless JSON serialization.

Known representational limit: a family of ever-smaller atoms accumulating
at zero energy is indistinguishable from mass placed exactly at the
origin once locations fall below the grid and merging resolution; no
attempt is made to resolve such supports.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linprog

from .truncation import TruncationParams, gamma1

__all__ = [
    "DomainError",
    "Grid",
    "HybridMeasure",
    "MomentReport",
    "Component",
    "ComponentPartition",
    "moment",
    "exp_moment",
    "entropy",
    "bl_distance",
    "components",
    "planck_density",
    "measure_to_dict",
    "measure_from_dict",
    "save_measure",
    "load_measure",
]

# Relative threshold below which a node's mass does not count as support;
# guards against floating-point zeros opening spurious gaps.
MASS_EPSILON = 1e-14

# Atoms closer than this (relative to max(1, x)) are merged; time
# integration can collapse distinct atoms numerically.
LOCATION_EPSILON = 1e-12


class DomainError(ValueError):
    """A functional was applied outside its domain of definition."""


@dataclass(frozen=True)
class Grid:
    """Strictly increasing positive nodes with trapezoid weights."""

    nodes: np.ndarray
    weights: np.ndarray

    def __post_init__(self) -> None:
        nodes = np.asarray(self.nodes, dtype=float)
        weights = np.asarray(self.weights, dtype=float)
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "weights", weights)
        if nodes.ndim != 1 or nodes.size < 2:
            raise ValueError("grid needs at least two nodes")
        if not (nodes[0] > 0.0 and np.all(np.diff(nodes) > 0.0)):
            raise ValueError("nodes must be positive and strictly increasing")
        if weights.shape != nodes.shape or not np.all(weights > 0.0):
            raise ValueError("weights must be positive and match the nodes")

    @classmethod
    def log_spaced(cls, lo: float, hi: float, n: int) -> "Grid":
        if not (0.0 < lo < hi) or n < 2:
            raise ValueError("need 0 < lo < hi and n >= 2")
        nodes = np.geomspace(lo, hi, n)
        weights = np.empty(n)
        weights[1:-1] = 0.5 * (nodes[2:] - nodes[:-2])
        weights[0] = 0.5 * (nodes[1] - nodes[0])
        weights[-1] = 0.5 * (nodes[-1] - nodes[-2])
        return cls(nodes=nodes, weights=weights)

    @property
    def n(self) -> int:
        return int(self.nodes.size)


def _merge_atoms(atoms: list[tuple[float, float]]) -> list[tuple[float, float]]:
    merged: list[tuple[float, float]] = []
    for x, m in sorted(atoms):
        if merged and abs(x - merged[-1][0]) < LOCATION_EPSILON * max(1.0, x):
            px, pm = merged[-1]
            merged[-1] = ((px * pm + x * m) / (pm + m), pm + m)
        else:
            merged.append((x, m))
    return merged


@dataclass
class HybridMeasure:
    """Atoms plus an optional grid density; all masses nonnegative.

    Atoms are kept sorted with pairwise distinct locations (near-coincident
    atoms are merged mass-weighted on construction); zero-mass atoms are
    dropped.  An atom at location 0 carries the origin mass.
    """

    atoms: list[tuple[float, float]] = field(default_factory=list)
    grid: Grid | None = None
    density: np.ndarray | None = None

    def __post_init__(self) -> None:
        for x, m in self.atoms:
            if x < 0.0:
                raise ValueError("atom locations must be nonnegative")
            if m < 0.0:
                raise ValueError("atom masses must be nonnegative")
        self.atoms = _merge_atoms([(float(x), float(m)) for x, m in self.atoms if m > 0.0])
        if (self.grid is None) != (self.density is None):
            raise ValueError("grid and density must be supplied together")
        if self.density is not None:
            self.density = np.asarray(self.density, dtype=float)
            if self.density.shape != self.grid.nodes.shape:
                raise ValueError("density shape must match the grid")
            if np.any(self.density < 0.0) or not np.all(np.isfinite(self.density)):
                raise ValueError("density must be finite and nonnegative")

    @property
    def origin_mass(self) -> float:
        for x, m in self.atoms:
            if x == 0.0:
                return m
        return 0.0

    @property
    def total_mass(self) -> float:
        return moment(self, 0.0)

    def node_masses(self) -> np.ndarray:
        if self.density is None:
            return np.array([])
        return self.grid.weights * self.density

    def support_points(self, mass_epsilon: float = MASS_EPSILON) -> list[tuple[float, float]]:
        """Sorted (location, mass) carriers above the relative mass threshold.

        Applies to atoms and nodes alike: a carrier below the threshold
        (e.g. an atom drained to integrator noise) must not bridge a
        decoupling gap.
        """
        node_masses = self.node_masses()
        total = float(math.fsum(node_masses) + math.fsum(m for _, m in self.atoms))
        cut = mass_epsilon * total
        pts = [(x, m) for x, m in self.atoms if m > cut]
        if self.density is not None:
            for x, m in zip(self.grid.nodes, node_masses):
                if m > cut:
                    pts.append((float(x), float(m)))
        return sorted(pts)


@dataclass(frozen=True)
class MomentReport:
    """Standard diagnostics of one state."""

    M0: float
    M_alpha: dict[float, float]
    X_eta: float
    H: float
    alpha0: float

    @classmethod
    def of(cls, u: "HybridMeasure", alphas: tuple[float, ...] = (1.0, 2.0, 3.0), eta: float = 0.25) -> "MomentReport":
        return cls(
            M0=moment(u, 0.0),
            M_alpha={a: moment(u, a) for a in alphas},
            X_eta=exp_moment(u, eta),
            H=entropy(u),
            alpha0=u.origin_mass,
        )


def moment(u: HybridMeasure, rho: float) -> float:
    """Power moment of order rho: sum of x^rho against the measure."""
    terms = []
    for x, m in u.atoms:
        if x == 0.0:
            if rho < 0.0:
                raise DomainError("negative-order moment of an atom at the origin")
            if rho == 0.0:
                terms.append(m)
        else:
            terms.append(x**rho * m)
    total = math.fsum(terms)
    if u.density is not None:
        total += float(np.dot(u.grid.weights, u.grid.nodes**rho * u.density))
    return total


def exp_moment(u: HybridMeasure, eta: float) -> float:
    """Exponential moment with rate eta >= 0; equals the mass at eta = 0."""
    if eta < 0.0:
        raise ValueError("eta must be nonnegative")
    if eta == 0.0:
        return moment(u, 0.0)
    top = max((x for x, _ in u.atoms), default=0.0)
    if u.density is not None:
        top = max(top, float(u.grid.nodes[-1]))
    if eta * top > 700.0:
        raise OverflowError(f"exp moment overflows: eta * max support = {eta * top:.3g} > 700")
    total = math.fsum(m * math.exp(eta * x) for x, m in u.atoms)
    if u.density is not None:
        total += float(np.dot(u.grid.weights, np.exp(eta * u.grid.nodes) * u.density))
    return total


def _entropy_integrand(x: np.ndarray, s: np.ndarray) -> np.ndarray:
    # h(x, s) = (x^2+s) log(x^2+s) - s log s - x^2 log x^2 - s x,
    # with the s log s -> 0 limit at s = 0.
    x2 = x * x
    with np.errstate(divide="ignore", invalid="ignore"):
        slogs = np.where(s > 0.0, s * np.log(s), 0.0)
    return (x2 + s) * np.log(x2 + s) - slogs - x2 * np.log(x2) - s * x


def entropy(u: HybridMeasure) -> float:
    """Physical entropy: density part through h, atoms through -x * mass.

    The origin atom contributes nothing.  Among all states of a given mass
    the entropy is maximal exactly at the equilibrium family (a chemical-
    potential density plus an optional origin atom).
    """
    total = -math.fsum(x * m for x, m in u.atoms)
    if u.density is not None:
        total += float(np.dot(u.grid.weights, _entropy_integrand(u.grid.nodes, u.density)))
    return total


def _signed_point_masses(u: HybridMeasure, v: HybridMeasure) -> tuple[np.ndarray, np.ndarray]:
    locs: list[float] = []
    masses: list[float] = []
    for w, sign in ((u, 1.0), (v, -1.0)):
        for x, m in w.atoms:
            locs.append(x)
            masses.append(sign * m)
        if w.density is not None:
            for x, m in zip(w.grid.nodes, w.node_masses()):
                locs.append(float(x))
                masses.append(sign * float(m))
    order = np.argsort(locs)
    locs_arr = np.asarray(locs)[order]
    mass_arr = np.asarray(masses)[order]
    # merge coincident points so the LP has distinct nodes
    keep_locs: list[float] = []
    keep_mass: list[float] = []
    for x, m in zip(locs_arr, mass_arr):
        if keep_locs and abs(x - keep_locs[-1]) < LOCATION_EPSILON * max(1.0, x):
            keep_mass[-1] += m
        else:
            keep_locs.append(float(x))
            keep_mass.append(float(m))
    return np.asarray(keep_locs), np.asarray(keep_mass)


def bl_distance(u: HybridMeasure, v: HybridMeasure) -> float:
    """Bounded-Lipschitz distance between two hybrid measures.

    Solves the dual linear program over piecewise-linear test functions on
    the merged support: maximize the pairing against u - v subject to
    |values| <= 1 and slopes <= 1.  Exact for purely atomic measures;
    first-order accurate in the grid spacing otherwise.
    """
    pts, mu = _signed_point_masses(u, v)
    if pts.size == 0:
        return 0.0
    if pts.size == 1:
        return abs(float(mu[0]))  # optimal test function is the constant +-1
    n = pts.size
    gaps = np.diff(pts)
    # variables phi_i; constraints phi_i - phi_{i+1} within +-gap_i
    rows = np.arange(n - 1)
    data_idx = np.zeros((n - 1, n))
    data_idx[rows, rows] = 1.0
    data_idx[rows, rows + 1] = -1.0
    a_ub = np.vstack([data_idx, -data_idx])
    b_ub = np.concatenate([gaps, gaps])
    res = linprog(-mu, A_ub=a_ub, b_ub=b_ub, bounds=[(-1.0, 1.0)] * n, method="highs")
    if not res.success:
        raise RuntimeError(f"bounded-Lipschitz LP failed: {res.message}")
    return max(0.0, float(-res.fun))


@dataclass(frozen=True)
class Component:
    """One maximal coupled block of the support."""

    points: tuple[float, ...]
    masses: tuple[float, ...]

    @property
    def min_point(self) -> float:
        return self.points[0]

    @property
    def max_point(self) -> float:
        return self.points[-1]

    @property
    def mass(self) -> float:
        return math.fsum(self.masses)


@dataclass(frozen=True)
class ComponentPartition:
    """Support split into blocks no pair of which the kernel couples."""

    components: tuple[Component, ...]

    @property
    def masses(self) -> tuple[float, ...]:
        return tuple(c.mass for c in self.components)

    @property
    def min_points(self) -> tuple[float, ...]:
        return tuple(c.min_point for c in self.components)

    @property
    def total_mass(self) -> float:
        # one flat correctly-rounded sum over every carrier: identical to the
        # measure's own mass path (fsum is permutation-invariant), so purely
        # atomic partitions reproduce the total mass bit for bit
        return math.fsum(m for c in self.components for m in c.masses)


def components(
    u: HybridMeasure,
    tp: TruncationParams,
    mass_epsilon: float = MASS_EPSILON,
) -> ComponentPartition:
    """Partition the support into blocks separated by decoupling gaps.

    A gap between consecutive support carriers p < q splits the support
    exactly when gamma1(q) >= p, i.e. when no pair across the gap lies in
    the coupling region.  Consecutive blocks are then separated by at least
    the z_gap of the right block's minimum.
    """
    pts = u.support_points(mass_epsilon)
    if not pts:
        return ComponentPartition(components=())
    blocks: list[list[tuple[float, float]]] = [[pts[0]]]
    for p in pts[1:]:
        prev = blocks[-1][-1][0]
        if gamma1(tp, p[0]) >= prev:
            blocks.append([p])
        else:
            blocks[-1].append(p)
    comps = tuple(
        Component(points=tuple(x for x, _ in b), masses=tuple(m for _, m in b)) for b in blocks
    )
    return ComponentPartition(components=comps)


def planck_density(grid: Grid, mu: float = 0.0) -> np.ndarray:
    """Equilibrium density x^2 / (e^{x - mu} - 1) sampled on the grid."""
    if mu > 0.0:
        raise ValueError("chemical potential must be <= 0")
    x = grid.nodes
    return x * x / np.expm1(x - mu)


def measure_to_dict(u: HybridMeasure) -> dict:
    """JSON-ready form; floats round-trip bit-exactly via repr."""
    out: dict = {"atoms": [[x, m] for x, m in u.atoms]}
    if u.grid is not None:
        out["grid"] = {
            "min": float(u.grid.nodes[0]),
            "max": float(u.grid.nodes[-1]),
            "n": u.grid.n,
            "spacing": "log",
        }
        out["density"] = [float(g) for g in u.density]
    return out


def measure_from_dict(d: dict) -> HybridMeasure:
    atoms = [(float(x), float(m)) for x, m in d.get("atoms", [])]
    grid = None
    density = None
    if "grid" in d:
        g = d["grid"]
        if g.get("spacing", "log") != "log":
            raise ValueError("only log-spaced grids are supported")
        grid = Grid.log_spaced(g["min"], g["max"], g["n"])
        density = np.asarray(d["density"], dtype=float)
    return HybridMeasure(atoms=atoms, grid=grid, density=density)


def save_measure(u: HybridMeasure, path) -> None:
    with open(path, "w") as f:
        json.dump(measure_to_dict(u), f, indent=1)


def load_measure(path) -> HybridMeasure:
    with open(path) as f:
        return measure_from_dict(json.load(f))
