"""Sequential DSMC of unsteady flows.

One time step is Generation -> Motion -> Enumeration/Indexing ->
Interaction -> Sampling.  The step is written as three stages so the
parallel strategies can reuse it unchanged:

* :func:`stage_particles` -- per-particle work, partitioned by stride;
* :func:`stage_serial` -- removal/insertion and the cell index rebuild,
  which needs every particle and therefore runs on one worker;
* :func:`stage_cells` -- per-cell collisions and sampling, partitioned
  by stride.

All randomness comes from keyed sub-streams (see :mod:`dsmcpar.rng`), so the
outcome never depends on how a stage was partitioned.

Units: molecular mass and Boltzmann constant are 1, so a temperature is
the variance of one velocity component.
"""

from __future__ import annotations

import math
import time
import warnings
from dataclasses import dataclass, field

import numpy as np

from . import kernels, rng
from .errors import ConfigError
from .grid import DIFFUSE, OPEN, CellGrid, Geometry


# -- configuration ----------------------------------------------------------

@dataclass(frozen=True)
class SimulationClock:
    dt: float
    dt_s: float
    dt_L: float
    dt_av: float | None = None
    t_H: float | None = None

    def __post_init__(self):
        if not (0 < self.dt <= self.dt_s <= self.dt_L):
            raise ConfigError("clock requires 0 < dt <= dt_s <= dt_L")
        for name, ratio in (("dt_s/dt", self.dt_s / self.dt), ("dt_L/dt_s", self.dt_L / self.dt_s)):
            if abs(ratio - round(ratio)) > 1e-9 * max(1.0, ratio):
                raise ConfigError(f"{name} must be an integer, got {ratio!r}")
        if self.dt_av is not None and self.dt_av < self.dt:
            raise ConfigError("averaging interval dt_av must be >= dt")

    @property
    def steps_per_sample(self) -> int:
        return int(round(self.dt_s / self.dt))

    @property
    def n_steps(self) -> int:
        return int(round(self.dt_L / self.dt))

    def sampling_steps(self) -> list[int]:
        """Step counts after which a snapshot is taken (t > dt_s only)."""
        k = self.steps_per_sample
        return [s for s in range(2 * k, self.n_steps + 1, k)]

    def check_averaging(self, ratio: float = 10.0) -> list[str]:
        """Warnings for dt_av not much larger than dt or not much smaller than t_H."""
        msgs = []
        if self.dt_av is not None:
            if self.dt_av < ratio * self.dt:
                msgs.append(f"dt_av={self.dt_av} is less than {ratio:g}*dt={ratio * self.dt}")
            if self.t_H is not None and self.dt_av > self.t_H / ratio:
                msgs.append(f"dt_av={self.dt_av} exceeds t_H/{ratio:g}={self.t_H / ratio}")
        for m in msgs:
            warnings.warn(m, stacklevel=2)
        return msgs


@dataclass(frozen=True)
class Inflow:
    """Drifting-Maxwellian reservoir feeding particles through one open face."""

    face: int
    number_density: float
    temperature: float
    drift: tuple = (0.0, 0.0, 0.0)


@dataclass(frozen=True)
class GasState:
    """Uniform gas used for the initial fill.

    ``region`` optionally restricts the fill to a box ``(lo, hi)``.
    """

    number_density: float
    temperature: float
    drift: tuple = (0.0, 0.0, 0.0)
    region: tuple | None = None


@dataclass(frozen=True)
class CollisionParams:
    diameter: float
    weight: float = 1.0
    crmax_init: float | None = None
    enabled: bool = True

    @property
    def cross_section(self) -> float:
        return math.pi * self.diameter ** 2


@dataclass(frozen=True)
class FlowProblem:
    geometry: Geometry
    clock: SimulationClock
    collision: CollisionParams
    inflow: tuple = ()
    initial_fill: GasState | None = None
    name: str = "problem"

    @property
    def grid(self) -> CellGrid:
        return self.geometry.grid

    def validate(self) -> "FlowProblem":
        if not self.inflow and self.initial_fill is None:
            raise ConfigError("problem has neither inflow nor an initial fill")
        for f in self.inflow:
            if f.face >= 2 * self.grid.dim:
                raise ConfigError(f"inflow face {f.face} does not exist on a {self.grid.dim}-D grid")
            if self.geometry.face_kind[f.face] != OPEN:
                raise ConfigError(f"inflow face {f.face} must be open")
            if f.temperature <= 0 or f.number_density < 0:
                raise ConfigError("inflow needs temperature > 0 and number_density >= 0")
        if self.collision.weight <= 0 or self.collision.diameter < 0:
            raise ConfigError("collision weight must be > 0 and diameter >= 0")
        return self

    def reference_temperature(self) -> float:
        temps = [f.temperature for f in self.inflow]
        if self.initial_fill is not None:
            temps.append(self.initial_fill.temperature)
        temps += [t for k, t in zip(self.geometry.face_kind, self.geometry.face_temp) if k == DIFFUSE]
        return max(temps) if temps else 1.0

    def reference_speed(self) -> float:
        drifts = [np.linalg.norm(f.drift) for f in self.inflow]
        if self.initial_fill is not None:
            drifts.append(np.linalg.norm(self.initial_fill.drift))
        return max(drifts) if drifts else 0.0

    def crmax_init(self) -> float:
        if self.collision.crmax_init is not None:
            return float(self.collision.crmax_init)
        return 6.0 * math.sqrt(2.0 * self.reference_temperature()) + 2.0 * self.reference_speed()


# -- core data --------------------------------------------------------------

class ParticleStore:
    """Array of particles (positions, velocities) with a live prefix of length ``n``."""

    def __init__(self, dim: int, capacity: int = 1024):
        self.dim = dim
        capacity = max(int(capacity), 16)
        self.pos = np.zeros((capacity, dim))
        self.vel = np.zeros((capacity, 3))
        self.removed = np.zeros(capacity, np.uint8)
        self.n = 0

    def __len__(self):
        return self.n

    @property
    def capacity(self) -> int:
        return self.pos.shape[0]

    def live_pos(self) -> np.ndarray:
        return self.pos[: self.n]

    def live_vel(self) -> np.ndarray:
        return self.vel[: self.n]

    def _grow(self, need: int):
        cap = self.capacity
        while cap < need:
            cap *= 2
        if cap == self.capacity:
            return
        for name in ("pos", "vel", "removed"):
            old = getattr(self, name)
            new = np.zeros((cap,) + old.shape[1:], old.dtype)
            new[: self.n] = old[: self.n]
            setattr(self, name, new)

    def append(self, pos: np.ndarray, vel: np.ndarray) -> int:
        k = len(pos)
        if k == 0:
            return 0
        self._grow(self.n + k)
        self.pos[self.n: self.n + k] = pos
        self.vel[self.n: self.n + k] = vel
        self.removed[self.n: self.n + k] = 0
        self.n += k
        return k

    def compact(self) -> int:
        """Drop particles flagged in ``removed`` by swap-with-last.

        Holes are filled in ascending order, each by the current last live
        particle.  Returns the number dropped.
        """
        flags = self.removed[: self.n]
        gone = np.flatnonzero(flags)
        if gone.size == 0:
            return 0
        n_new = self.n - gone.size
        holes = gone[gone < n_new]
        tail = np.arange(n_new, self.n)
        fillers = tail[flags[n_new:] == 0][::-1]
        self.pos[holes] = self.pos[fillers]
        self.vel[holes] = self.vel[fillers]
        self.removed[: self.n] = 0
        self.n = n_new
        return int(gone.size)

    def copy(self) -> "ParticleStore":
        out = ParticleStore(self.dim, self.capacity)
        out.append(self.live_pos(), self.live_vel())
        return out


@dataclass
class CellIndex:
    """Particle ids grouped by cell: cell ``c`` owns ``perm[starts[c]:starts[c+1]]``."""

    starts: np.ndarray
    perm: np.ndarray
    cell_of: np.ndarray

    @property
    def n_cells(self) -> int:
        return self.starts.size - 1

    @property
    def counts(self) -> np.ndarray:
        return np.diff(self.starts)

    def members(self, c: int) -> np.ndarray:
        return self.perm[self.starts[c]: self.starts[c + 1]]

    def cell_sorted(self) -> np.ndarray:
        return self.cell_of[self.perm]


@dataclass
class CellAccumulator:
    """Per-cell sums of sampled particle data."""

    sample_count: np.ndarray
    sum_n: np.ndarray
    sum_v: np.ndarray
    sum_v2: np.ndarray

    @classmethod
    def zeros(cls, n_cells: int) -> "CellAccumulator":
        return cls(
            np.zeros(n_cells, np.int64),
            np.zeros(n_cells, np.int64),
            np.zeros((n_cells, 3)),
            np.zeros(n_cells),
        )

    def copy(self) -> "CellAccumulator":
        return CellAccumulator(self.sample_count.copy(), self.sum_n.copy(), self.sum_v.copy(), self.sum_v2.copy())

    def add(self, other: "CellAccumulator"):
        self.sample_count += other.sample_count
        self.sum_n += other.sum_n
        self.sum_v += other.sum_v
        self.sum_v2 += other.sum_v2

    def equals(self, other: "CellAccumulator") -> bool:
        return all(
            np.array_equal(getattr(self, f), getattr(other, f))
            for f in ("sample_count", "sum_n", "sum_v", "sum_v2")
        )

    def derived(self, weight: float, volumes: np.ndarray) -> dict:
        """Density, bulk velocity and temperature; NaN where nothing was sampled."""
        cnt = self.sample_count.astype(float)
        n = self.sum_n.astype(float)
        with np.errstate(divide="ignore", invalid="ignore"):
            density = np.where((cnt > 0) & (volumes > 0), n * weight / (cnt * volumes), np.nan)
            u = np.where(n[:, None] > 0, self.sum_v / n[:, None], np.nan)
            temp = np.where(n > 1, (self.sum_v2 / n - (u * u).sum(axis=1)) / 3.0, np.nan)
        return {"density": density, "velocity": u, "temperature": temp}


@dataclass
class RunResult:
    run_id: int
    times: list
    snapshots: list
    collision_count: int
    particle_count_history: list
    inserted: int = 0
    removed: int = 0
    profile: dict = field(default_factory=dict, compare=False)

    def same_science(self, other: "RunResult") -> bool:
        """Bit-level equality of everything except timing."""
        return (
            self.run_id == other.run_id
            and self.times == other.times
            and self.collision_count == other.collision_count
            and self.particle_count_history == other.particle_count_history
            and self.inserted == other.inserted
            and self.removed == other.removed
            and len(self.snapshots) == len(other.snapshots)
            and all(a.equals(b) for a, b in zip(self.snapshots, other.snapshots))
        )


# -- operations -------------------------------------------------------------

def inflow_flux(number_density: float, temperature: float, normal_drift: float) -> float:
    """Number flux per unit area of a drifting Maxwellian through a plane.

    ``normal_drift`` is the bulk velocity component pointing into the domain.
    """
    s = normal_drift / math.sqrt(2.0 * temperature)
    cbar = math.sqrt(8.0 * temperature / math.pi)
    return number_density * cbar / 4.0 * (math.exp(-s * s) + math.sqrt(math.pi) * s * (1.0 + math.erf(s)))


def face_geometry(grid: CellGrid, face: int):
    """(axis, inward sign, plane coordinate, area) of a domain face."""
    axis, side = divmod(face, 2)
    plane = grid.hi[axis] if side else grid.lo[axis]
    sign = -1.0 if side else 1.0
    if grid.dim == 1:
        area = 1.0
    else:
        o = 1 - axis
        area = grid.hi[o] - grid.lo[o]
    return axis, sign, plane, area


def _flux_normal_speeds(stream: rng.RngStream, count: int, sn: float) -> np.ndarray:
    """Inward normal speeds (units of sqrt(T)) with density ~ z exp(-(z - sn)^2 / 2), z > 0."""
    if count == 0:
        return np.zeros(0)
    z_mode = 0.5 * (sn + math.sqrt(sn * sn + 4.0))
    lo = max(0.0, sn - 8.0)
    hi = max(sn, 0.0) + 8.0
    out = []
    need = count
    while need > 0:
        m = max(2 * need, 16)
        u = stream.uniform(2 * m)
        z = lo + (hi - lo) * u[0::2]
        ratio = (z / z_mode) * np.exp(-0.5 * ((z - sn) ** 2 - (z_mode - sn) ** 2))
        ok = z[u[1::2] < ratio]
        out.append(ok[:need])
        need -= min(need, ok.size)
    return np.concatenate(out)


def generate_particles(problem: FlowProblem, stream: rng.RngStream, inflow: Inflow) -> tuple:
    """New particles entering through ``inflow.face`` during one time step.

    Returns ``(pos, vel, dt_fraction)``: particles start on the face and
    still have to be moved for ``dt_fraction * dt``.
    """
    grid = problem.grid
    dt = problem.clock.dt
    axis, sign, plane, area = face_geometry(grid, inflow.face)
    drift = np.asarray(inflow.drift, float)
    un = sign * drift[axis]
    flux = inflow_flux(inflow.number_density, inflow.temperature, un) if inflow.number_density > 0 else 0.0
    expected = flux * area * dt / problem.collision.weight
    count = int(math.floor(expected + stream.uniform()))
    dim = grid.dim
    if count == 0:
        return np.zeros((0, dim)), np.zeros((0, 3)), np.zeros(0)
    sig = math.sqrt(inflow.temperature)
    vel = stream.normal((count, 3)) * sig + drift
    vel[:, axis] = sign * sig * _flux_normal_speeds(stream, count, un / sig)
    pos = np.empty((count, dim))
    pos[:, axis] = plane
    if dim == 2:
        o = 1 - axis
        pos[:, o] = grid.lo[o] + (grid.hi[o] - grid.lo[o]) * stream.uniform(count)
    frac = stream.uniform(count)
    return pos, vel, frac


def fill_uniform(problem: FlowProblem, stream: rng.RngStream) -> tuple:
    """Initial uniform gas (excluding any body) as ``(pos, vel)``."""
    gas = problem.initial_fill
    grid = problem.grid
    dim = grid.dim
    if gas is None or gas.number_density <= 0:
        return np.zeros((0, dim)), np.zeros((0, 3))
    body = problem.geometry.body
    if gas.region is None:
        lo = np.asarray(grid.lo, float)
        ext = np.asarray(grid.hi, float) - lo
        vol = float(problem.geometry.cell_volumes().sum())
    else:
        lo = np.maximum(np.asarray(gas.region[0], float), grid.lo)
        ext = np.minimum(np.asarray(gas.region[1], float), grid.hi) - lo
        if np.any(ext <= 0):
            raise ConfigError("fill region does not intersect the domain")
        vol = float(np.prod(ext))
        if body is not None:
            olo = np.maximum(lo, body.lo)
            ohi = np.minimum(lo + ext, body.hi)
            vol -= float(np.prod(np.clip(ohi - olo, 0, None)))
    count = int(math.floor(gas.number_density * vol / problem.collision.weight + stream.uniform()))
    chunks = []
    need = count
    while need > 0:
        cand = lo + ext * stream.uniform((max(need, 16), dim))
        if body is not None:
            cand = cand[~body.contains(cand)]
        chunks.append(cand[:need])
        need -= min(need, len(cand))
    pos = np.concatenate(chunks) if chunks else np.zeros((0, dim))
    vel = rng.sample_maxwellian(stream, gas.temperature, gas.drift, count)
    return pos, vel


def move_particles(store: ParticleStore, geometry: Geometry, dt: float, key_base: int = 0,
                   start: int = 0, stride: int = 1, stop: int | None = None, dts=None, backend=None) -> int:
    """Advance particles ``start::stride`` by ``dt`` with wall interaction.

    Particles leaving through an open face are flagged in ``store.removed``;
    they are dropped by :meth:`ParticleStore.compact`.  Returns the number flagged.
    """
    k = backend or kernels.default
    stop = store.n if stop is None else stop
    return k.move(store.pos, store.vel, store.removed, start, stop, stride, float(dt), dts,
                  geometry.packed, np.uint64(key_base))


def enumerate_and_index(store: ParticleStore, grid: CellGrid, backend=None) -> CellIndex:
    """Rebuild the cell index (counting pass, then placement pass)."""
    k = backend or kernels.default
    cell, starts, perm = k.index_cells(store.pos, store.n, grid.dim, grid.lo2(), grid.hi2(),
                                       grid.dx2(), grid.nx, grid.ny)
    return CellIndex(starts, perm, cell)


def collide_cells(store: ParticleStore, index: CellIndex, crmax: np.ndarray, inv_volume: np.ndarray,
                  collision: CollisionParams, dt: float, key_base: int, start: int = 0, stride: int = 1,
                  backend=None) -> int:
    """Hard-sphere collisions by the no-time-counter scheme in cells ``start::stride``."""
    if not collision.enabled:
        return 0
    k = backend or kernels.default
    coef = collision.weight * collision.cross_section * dt
    return int(k.collide(store.vel, index.perm, index.starts, start, stride, crmax, inv_volume,
                         coef, np.uint64(key_base)))


def sample(index: CellIndex, store: ParticleStore, acc: CellAccumulator, start: int = 0, stride: int = 1,
           backend=None) -> CellAccumulator:
    k = backend or kernels.default
    acc.sample_count[start::stride] += 1
    k.sample(store.vel, index.perm, index.starts, index.cell_sorted(), start, stride,
             acc.sum_n, acc.sum_v, acc.sum_v2)
    return acc


# -- kernel state and stages ------------------------------------------------

class KernelState:
    """Everything one run needs between steps (the arrays P, LCR and C)."""

    def __init__(self, problem: FlowProblem, run_id: int = 0, master_seed: int = 0, backend=None,
                 fill: bool = True):
        self.problem = problem
        self.run_id = run_id
        self.master_seed = master_seed
        self.backend = backend or kernels.default
        self.stream = rng.stream_for_run(master_seed, run_id)
        g = problem.grid
        self.store = ParticleStore(g.dim)
        volumes = problem.geometry.cell_volumes()
        self.volumes = volumes
        with np.errstate(divide="ignore"):
            self.inv_volume = np.where(volumes > 0, 1.0 / volumes, 0.0)
        self.crmax = np.full(g.n_cells, problem.crmax_init())
        self.step_index = 0
        self.index: CellIndex | None = None
        self.pending = None
        self.snapshot: CellAccumulator | None = None
        self.collisions = 0
        self.inserted = 0
        self.removed = 0
        self._sampling = set(problem.clock.sampling_steps())
        if fill and problem.initial_fill is not None:
            pos, vel = fill_uniform(problem, self.stream.child(rng.INIT))
            self.store.append(pos, vel)

    @property
    def t(self) -> float:
        return self.step_index * self.problem.clock.dt

    def key_base(self, purpose: int, k: int | None = None) -> int:
        k = self.step_index if k is None else k
        return rng.derive(rng.derive(self.stream.key, purpose), k)

    def samples_after(self, k: int) -> bool:
        """Whether a snapshot is taken at the end of step ``k``."""
        return (k + 1) in self._sampling


def stage_particles(state: KernelState, m: int = 0, p: int = 1, k: int | None = None) -> int:
    """First stage of step ``k`` for worker ``m`` of ``p``: motion of particles ``m::p``.

    Worker 0 also generates the inflow particles of this step into a
    side buffer (inserted later by :func:`stage_serial`).
    """
    k = state.step_index if k is None else k
    prob = state.problem
    dt = prob.clock.dt
    if m == 0:
        _generate(state, k)
    return move_particles(state.store, prob.geometry, dt, state.key_base(rng.MOTION, k), start=m, stride=p,
                          backend=state.backend)


def _generate(state: KernelState, k: int):
    prob = state.problem
    if not prob.inflow:
        state.pending = None
        return
    parts = []
    for f in prob.inflow:
        s = rng.substream(state.stream, f.face, k, rng.GENERATION)
        parts.append(generate_particles(prob, s, f))
    pos = np.concatenate([a for a, _, _ in parts])
    vel = np.concatenate([b for _, b, _ in parts])
    frac = np.concatenate([c for _, _, c in parts])
    buf = ParticleStore(prob.grid.dim, len(pos))
    buf.append(pos, vel)
    if buf.n:
        move_particles(buf, prob.geometry, prob.clock.dt, state.key_base(rng.GEN_MOTION, k),
                       dts=frac * prob.clock.dt, backend=state.backend)
    state.pending = buf


def stage_serial(state: KernelState, k: int | None = None) -> CellIndex:
    """Removal of departed particles, insertion of new ones, index rebuild."""
    k = state.step_index if k is None else k
    store = state.store
    state.removed += store.compact()
    buf = state.pending
    if buf is not None and buf.n:
        buf.compact()
        state.inserted += store.append(buf.live_pos(), buf.live_vel())
    state.pending = None
    state.index = enumerate_and_index(store, state.problem.grid, backend=state.backend)
    state.snapshot = CellAccumulator.zeros(state.problem.grid.n_cells) if state.samples_after(k) else None
    return state.index


def stage_cells(state: KernelState, m: int = 0, p: int = 1, k: int | None = None) -> int:
    """Second stage for worker ``m`` of ``p``: collisions (and sampling) in cells ``m::p``."""
    prob = state.problem
    n = collide_cells(state.store, state.index, state.crmax, state.inv_volume, prob.collision,
                      prob.clock.dt, state.key_base(rng.COLLISION, k), start=m, stride=p, backend=state.backend)
    if state.snapshot is not None:
        sample(state.index, state.store, state.snapshot, start=m, stride=p, backend=state.backend)
    return n


def finish_step(state: KernelState, collisions: int, result: RunResult | None = None):
    state.collisions += collisions
    state.step_index += 1
    if state.snapshot is not None and result is not None:
        result.times.append(state.t)
        result.snapshots.append(state.snapshot)
        result.particle_count_history.append(state.store.n)
    state.snapshot = None


def step(state: KernelState, result: RunResult | None = None) -> KernelState:
    """Advance one time step on a single worker."""
    stage_particles(state)
    stage_serial(state)
    n = stage_cells(state)
    finish_step(state, n, result)
    return state


def new_result(state: KernelState) -> RunResult:
    return RunResult(state.run_id, [], [], 0, [])


def close_result(state: KernelState, result: RunResult) -> RunResult:
    result.collision_count = state.collisions
    result.inserted = state.inserted
    result.removed = state.removed
    return result


def run_unsteady(problem: FlowProblem, run_id: int = 0, master_seed: int = 0, backend=None) -> RunResult:
    """One statistically independent run from t = 0 to dt_L."""
    problem.validate()
    state = KernelState(problem, run_id, master_seed, backend)
    result = new_result(state)
    t_par = t_ser = 0.0
    for _ in range(problem.clock.n_steps):
        t0 = time.perf_counter()
        stage_particles(state)
        t1 = time.perf_counter()
        stage_serial(state)
        t2 = time.perf_counter()
        n = stage_cells(state)
        t3 = time.perf_counter()
        finish_step(state, n, result)
        t_par += (t1 - t0) + (t3 - t2)
        t_ser += t2 - t1
    result.profile = {"parallel": t_par, "serial": t_ser}
    return close_result(state, result)
