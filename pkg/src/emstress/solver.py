"""Finite-volume solver for Korhonen's stress equation on interconnect trees.

The PDE per branch is d(sigma)/dt = d/dx [ kappa (d(sigma)/dx + G) ] with
zero-flux blocked terminals, stress continuity at junctions, and
width-weighted zero net flux at junctions.

Discretization: one unknown per 1D cell (cell size dx, cells align with the
1 um raster grid when dx = 1) plus one shared zero-volume unknown per
interior junction.  Face fluxes use central differences, which makes the
scheme conservative (global stress content is exact up to linear-solver
roundoff) and exact for the piecewise-linear steady state.

Internally everything is SI (meters, seconds, Pa); geometry enters in um.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .model import (InterconnectTree, PhysicalParams, KIND_JUNCTION,
                    diffusivity, driving_force, validate_tree)

UM = 1e-6                      # meters per micrometer
YEAR_SECONDS = 365.0 * 24 * 3600

BACKWARD_EULER = "backward-euler"
CRANK_NICOLSON = "crank-nicolson"


class SolverError(RuntimeError):
    pass


@dataclass(frozen=True)
class SolverConfig:
    dx: float = 1.0                 # um
    dt_initial: float = 1e4        # s, first step of the geometric ramp
    dt_max: float = 1e6            # s, uniform step after the ramp
    dt_growth: float = 2.0         # ramp ratio
    time_integrator: str = BACKWARD_EULER
    linear_solver_tol: float = 1e-10

    def validate(self) -> None:
        if not self.dx > 0:
            raise ValueError("dx must be positive")
        if not (self.dt_initial > 0 and self.dt_max >= self.dt_initial
                and self.dt_growth >= 1):
            raise ValueError("invalid dt schedule")
        if self.time_integrator not in (BACKWARD_EULER, CRANK_NICOLSON):
            raise ValueError(f"unknown integrator {self.time_integrator!r}")
        if not 0 < self.linear_solver_tol < 1:
            raise ValueError("linear_solver_tol must be in (0,1)")

    def dt_at(self, k: int) -> float:
        if self.dt_growth <= 1.0:
            return min(self.dt_initial, self.dt_max)
        k_cap = math.ceil(math.log(self.dt_max / self.dt_initial)
                          / math.log(self.dt_growth))
        return min(self.dt_initial * self.dt_growth ** min(k, k_cap), self.dt_max)


@dataclass
class Mesh:
    """Index map from (branch, cell) and junction nodes to global unknowns.

    Cells of branch b occupy global indices cell_start[b] .. +cell_count[b];
    interior junction nodes share one unknown each, appended after all cells.
    """
    tree: InterconnectTree
    dx: float                       # um
    branch_ids: list[int]
    cell_counts: list[int]
    cell_starts: list[int]
    junction_nodes: list[int]       # node ids, sorted
    junction_index: dict[int, int]  # node id -> global unknown
    n_unknowns: int

    def branch_slice(self, pos: int) -> slice:
        return slice(self.cell_starts[pos], self.cell_starts[pos] + self.cell_counts[pos])


def build_mesh(tree: InterconnectTree, cfg: SolverConfig) -> Mesh:
    cfg.validate()
    branch_ids, counts, starts = [], [], []
    offset = 0
    for b in tree.branches:
        L = tree.branch_length(b)
        n = round(L / cfg.dx)
        if abs(n * cfg.dx - L) > 1e-9 * max(L, cfg.dx) or n < 1:
            raise SolverError(f"branch {b.id}: length {L} um is not a multiple "
                              f"of dx={cfg.dx} um")
        branch_ids.append(b.id)
        counts.append(n)
        starts.append(offset)
        offset += n
    junction_nodes = sorted(n.id for n in tree.nodes if n.kind == KIND_JUNCTION)
    junction_index = {nid: offset + i for i, nid in enumerate(junction_nodes)}
    return Mesh(tree=tree, dx=cfg.dx, branch_ids=branch_ids, cell_counts=counts,
                cell_starts=starts, junction_nodes=junction_nodes,
                junction_index=junction_index,
                n_unknowns=offset + len(junction_nodes))


@dataclass
class StressField:
    """Discrete stress snapshots: per-branch cell-center values plus the
    shared junction values, one set per reported time (seconds)."""
    design_id: int
    times: list[float]                    # seconds
    branch_ids: list[int]
    branch_values: list[list[np.ndarray]]  # [time][branch] -> float64 array
    junction_nodes: list[int]
    junction_values: list[np.ndarray]      # [time] -> float64 array
    dx: float = 1.0                        # um

    def time_index(self, t_seconds: float, rtol: float = 1e-9) -> int:
        for i, t in enumerate(self.times):
            if math.isclose(t, t_seconds, rel_tol=rtol, abs_tol=1e-6):
                return i
        raise KeyError(f"time {t_seconds} s not in field (have {self.times})")

    def values(self, t_seconds: float, branch_id: int) -> np.ndarray:
        ti = self.time_index(t_seconds)
        return self.branch_values[ti][self.branch_ids.index(branch_id)]


def total_content(tree: InterconnectTree, field: StressField, time_idx: int,
                  params: PhysicalParams) -> float:
    """Global stress content sum(w * t_metal * dx * sigma) in Pa*um^3.

    Junction unknowns carry zero volume and do not contribute.
    """
    by_id = {b.id: b for b in tree.branches}
    parts = []
    for pos, bid in enumerate(field.branch_ids):
        b = by_id[bid]
        scale = b.width * params.t_metal * field.dx
        parts.extend(scale * v for v in field.branch_values[time_idx][pos])
    return math.fsum(parts)


class TreeSolver:
    """Owns the assembled operator for one (tree, params, config) triple.

    The semidiscrete system is M dsigma/dt = -K sigma + g with M the cell
    volumes (zero on junction rows, which are pure flux-balance constraints).
    """

    def __init__(self, tree: InterconnectTree, params: PhysicalParams,
                 cfg: SolverConfig | None = None, check: bool = True):
        cfg = cfg or SolverConfig()
        cfg.validate()
        params.validate()
        if check:
            violations = validate_tree(tree, params)
            if violations:
                raise SolverError("invalid tree: " + "; ".join(violations))
        self.tree = tree
        self.params = params
        self.cfg = cfg
        self.mesh = build_mesh(tree, cfg)
        self._assemble()
        self._lu_cache: dict[tuple[float, float], object] = {}

    # -- assembly ----------------------------------------------------------

    def _assemble(self) -> None:
        tree, params, mesh = self.tree, self.params, self.mesh
        kappa = diffusivity(params)
        dx_m = mesh.dx * UM
        t_m = params.t_metal * UM

        n = mesh.n_unknowns
        rows, cols, vals = [], [], []
        g = np.zeros(n)
        M = np.zeros(n)

        def add_face(a: int, c: int, cond: float, gterm: float) -> None:
            # net inflow to a: cond*(sigma_c - sigma_a) + gterm; opposite for c
            rows.extend((a, a, c, c))
            cols.extend((a, c, c, a))
            vals.extend((cond, -cond, cond, -cond))
            g[a] += gterm
            g[c] -= gterm

        for pos, b in enumerate(tree.branches):
            nb = mesh.cell_counts[pos]
            s0 = mesh.cell_starts[pos]
            w_m = b.width * UM
            G = driving_force(b, params)
            cond_in = w_m * t_m * kappa / dx_m
            gterm = w_m * t_m * kappa * G
            M[s0:s0 + nb] = w_m * t_m * dx_m
            for i in range(nb - 1):
                add_face(s0 + i, s0 + i + 1, cond_in, gterm)
            # end faces: junction half-cell coupling or blocked (omitted)
            left = tree.node(b.from_node)
            right = tree.node(b.to_node)
            cond_j = w_m * t_m * kappa / (dx_m / 2)
            if left.kind == KIND_JUNCTION:
                add_face(mesh.junction_index[left.id], s0, cond_j, gterm)
            if right.kind == KIND_JUNCTION:
                add_face(s0 + nb - 1, mesh.junction_index[right.id], cond_j, gterm)

        K = sp.csr_matrix(sp.coo_matrix((vals, (rows, cols)), shape=(n, n)))
        self.K = K
        self.g = g
        self.M = M
        # theta per row: junction constraint rows stay fully implicit
        theta = 0.5 if self.cfg.time_integrator == CRANK_NICOLSON else 1.0
        th = np.full(n, theta)
        th[self.M == 0] = 1.0
        self._theta_row = th
        self._M_ld = self.M.astype(np.longdouble)
        self._total_volume = float(np.sum(self.M))

    # -- linear algebra ----------------------------------------------------

    def _lu(self, dt: float, theta_override: float | None = None):
        key = (dt, -1.0 if theta_override is None else theta_override)
        lu = self._lu_cache.get(key)
        if lu is None:
            th = self._theta_row if theta_override is None else \
                np.where(self.M == 0, 1.0, theta_override)
            A = sp.diags(self.M / dt) + sp.diags(th) @ self.K
            lu = spla.splu(sp.csc_matrix(A))
            self._lu_cache[key] = (lu, sp.csr_matrix(A), th)
        return self._lu_cache[key]

    def _solve_refined(self, lu, A, rhs: np.ndarray) -> np.ndarray:
        x = lu.solve(rhs)
        scale = np.linalg.norm(rhs) + 1e-300
        for _ in range(3):
            r = rhs - A @ x
            if np.linalg.norm(r) <= self.cfg.linear_solver_tol * scale:
                break
            x = x + lu.solve(r)
        if not np.all(np.isfinite(x)):
            raise SolverError("non-finite values in linear solve")
        return x

    def step(self, sigma: np.ndarray, dt: float,
             theta_override: float | None = None) -> np.ndarray:
        """One implicit step of the conservative scheme."""
        if dt <= 0:
            raise SolverError("dt must be positive")
        lu, A, th = self._lu(dt, theta_override)
        Ks = self.K @ sigma
        rhs = (self.M / dt) * sigma - (1.0 - th) * Ks + self.g
        out = self._solve_refined(lu, A, rhs)
        # The conserved mode (constant shift, K @ 1 = 0) evolves trivially:
        # pin it in extended precision so content never random-walks.
        target = self._content_ld(sigma)
        drift = self._content_ld(out) - target
        out += float(-drift / self._total_volume)
        return out

    def _content_ld(self, sigma: np.ndarray):
        return np.dot(self._M_ld, sigma.astype(np.longdouble))

    # -- time integration ---------------------------------------------------

    def initial_state(self) -> np.ndarray:
        return np.full(self.mesh.n_unknowns, self.params.sigma_T, dtype=float)

    def solve_transient(self, report_times_years: list[float]) -> StressField:
        times = list(report_times_years)
        if any(t < 0 for t in times) or any(b <= a for a, b in zip(times, times[1:])):
            raise SolverError("report times must be strictly increasing and >= 0")
        sigma = self.initial_state()
        out = StressField(design_id=self.tree.design_id, times=[],
                          branch_ids=list(self.mesh.branch_ids),
                          branch_values=[], junction_nodes=list(self.mesh.junction_nodes),
                          junction_values=[], dx=self.mesh.dx)
        cn = self.cfg.time_integrator == CRANK_NICOLSON
        t = 0.0
        k = 0          # schedule index
        n_steps = 0
        for ty in times:
            target = ty * YEAR_SECONDS
            while t < target * (1 - 1e-12):
                dt = min(self.cfg.dt_at(k), target - t)
                if cn and n_steps < 2:
                    # Rannacher startup: damp the inconsistent initial
                    # junction state with two backward-Euler half steps
                    sigma = self.step(sigma, dt / 2, theta_override=1.0)
                    sigma = self.step(sigma, dt / 2, theta_override=1.0)
                else:
                    sigma = self.step(sigma, dt)
                t += dt
                k += 1
                n_steps += 1
            t = target
            self._append_snapshot(out, sigma, target)
        return out

    def steady_state(self) -> StressField:
        """Piecewise-linear steady solution with the free constant fixed by
        global content conservation."""
        n = self.mesh.n_unknowns
        m = self.M  # volume weights; junction rows weigh zero
        A = sp.bmat([[self.K, m.reshape(-1, 1)],
                     [m.reshape(1, -1), None]], format="csc")
        rhs = np.concatenate([self.g, [float(np.sum(m)) * self.params.sigma_T]])
        x = spla.spsolve(A, rhs)
        if not np.all(np.isfinite(x)):
            raise SolverError("steady-state solve produced non-finite values")
        sigma = x[:n]
        out = StressField(design_id=self.tree.design_id, times=[],
                          branch_ids=list(self.mesh.branch_ids),
                          branch_values=[], junction_nodes=list(self.mesh.junction_nodes),
                          junction_values=[], dx=self.mesh.dx)
        self._append_snapshot(out, sigma, math.inf)
        return out

    def _append_snapshot(self, out: StressField, sigma: np.ndarray, t: float) -> None:
        out.times.append(t)
        out.branch_values.append(
            [sigma[self.mesh.branch_slice(pos)].copy()
             for pos in range(len(self.mesh.branch_ids))])
        jn = np.array([sigma[self.mesh.junction_index[nid]]
                       for nid in self.mesh.junction_nodes], dtype=float)
        out.junction_values.append(jn)

    def content(self, sigma: np.ndarray) -> float:
        """Stress content sum(V_i sigma_i) in SI (Pa*m^3)."""
        return float(np.dot(self.M, sigma))


# -- convenience wrappers ---------------------------------------------------

def step(mesh: Mesh, sigma: np.ndarray, dt: float, params: PhysicalParams,
         cfg: SolverConfig | None = None) -> np.ndarray:
    """One-shot step; builds the operator each call (tests / small cases)."""
    solver = TreeSolver(mesh.tree, params, cfg or SolverConfig(dx=mesh.dx), check=False)
    return solver.step(sigma, dt)


def solve_transient(tree: InterconnectTree, params: PhysicalParams,
                    cfg: SolverConfig, report_times_years: list[float]) -> StressField:
    return TreeSolver(tree, params, cfg).solve_transient(report_times_years)


def steady_state(tree: InterconnectTree, params: PhysicalParams,
                 cfg: SolverConfig | None = None) -> StressField:
    return TreeSolver(tree, params, cfg or SolverConfig()).steady_state()


# -- analytic single-segment oracle ----------------------------------------

def analytic_single_segment(L: float, G: float, kappa: float, sigma_T: float,
                            x, t: float, rtol: float = 1e-6,
                            max_terms: int = 100000):
    """Series solution on a single blocked segment, SI units (L, x in m).

    sigma(x,t) = sigma_T + G(L/2 - x)
                 - sum_{k odd} (4GL / (k^2 pi^2)) cos(k pi x / L) exp(-kappa (k pi / L)^2 t)

    The cosine coefficients Fourier-expand G(L/2 - x) so sigma(x,0) = sigma_T.
    Truncates when the next term drops below rtol of the solution scale.
    """
    x = np.asarray(x, dtype=float)
    if np.any(x < -1e-12) or np.any(x > L * (1 + 1e-12)):
        raise ValueError("x outside [0, L]")
    if t < 0:
        raise ValueError("t must be >= 0")
    acc = sigma_T + G * (L / 2 - x)
    scale = abs(sigma_T) + abs(G) * L / 2 + 1e-300
    k = 1
    while True:
        arg = kappa * (k * math.pi / L) ** 2 * t
        damp = math.exp(-arg) if arg < 700 else 0.0
        term = 4 * G * L / (k * k * math.pi * math.pi) * damp
        ref = max(scale, float(np.max(np.abs(acc))))
        if abs(term) < rtol * ref:
            break
        acc = acc - term * np.cos(k * math.pi * x / L)
        k += 2
        if k > max_terms:
            raise SolverError(f"series did not converge within {max_terms} terms")
    return acc
