"""Two-species exclusion process with a drifted aware species, an exit door,
obstacles, and a rejection-free kinetic Monte Carlo engine.

Sites are indexed (column, row) with 0-based arrays internally; scenario files
use 1-based site numbers (documented in the README).  The door sits on the top
row.  Unaware particles hop symmetrically at unit rate into empty neighbors;
aware particles never hop down, carry a vertical bias upward, a horizontal
bias toward the door column band, and inside the band move only upward.
Particles hopping up from a door site leave the system.

The hot loop is compiled with numba; the plain-Python rate functions below are
the readable reference and are cross-checked against the compiled table in the
test suite.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numba import njit

EMPTY, UNAWARE, AWARE, BLOCKED = 0, 1, 2, 3
UP, DOWN, LEFT, RIGHT = 0, 1, 2, 3
_DIR_STEPS = ((0, 1), (0, -1), (-1, 0), (1, 0))

_SPECIES_NAME = {UNAWARE: "unaware", AWARE: "aware"}
_OCC_CHARS = {EMPTY: ".", UNAWARE: "U", AWARE: "A", BLOCKED: "#"}

_SAMPLE_CAP = 16384


class LatticeError(Exception):
    pass


class OverfullError(LatticeError):
    """More particles requested than accessible sites."""


class EmptySystemError(LatticeError):
    """Total rate is zero: every particle is gone or jammed."""


@dataclass(frozen=True)
class LatticeConfig:
    """Lattice geometry, drifts and initial occupancy.

    ``door_start`` is the 1-based column of the door's left end; the door
    occupies columns [door_start, door_start + door_width] inclusive when
    ``door_inclusive`` (door_width + 1 sites), else door_width sites.
    ``obstacle_sites`` are 1-based (column, row) pairs.
    """

    n_cols: int = 50
    n_rows: int = 50
    door_start: int = 24
    door_width: int = 2
    door_inclusive: bool = True
    drift_x: float = 0.1
    drift_y: float = 0.1
    occupancy: float = 0.985
    n_aware: int | None = None
    n_unaware: int | None = None
    obstacle_sites: tuple[tuple[int, int], ...] = ()

    @property
    def door_cols(self) -> tuple[int, int]:
        """0-based inclusive (first, last) door columns."""
        last = self.door_start + self.door_width if self.door_inclusive \
            else self.door_start + self.door_width - 1
        return self.door_start - 1, last - 1

    def validate(self) -> None:
        if self.n_cols < 1 or self.n_rows < 1:
            raise LatticeError("lattice must have at least one site")
        lo, hi = self.door_cols
        if lo < 0 or hi >= self.n_cols or hi < lo:
            raise LatticeError(
                f"door columns [{self.door_start}, {self.door_start + self.door_width}] "
                f"fall outside 1..{self.n_cols}")
        door_row_sites = {(c + 1, self.n_rows) for c in range(lo, hi + 1)}
        for site in self.obstacle_sites:
            i, j = site
            if not (1 <= i <= self.n_cols and 1 <= j <= self.n_rows):
                raise LatticeError(f"obstacle site {site} outside the lattice")
            if site in door_row_sites:
                raise LatticeError(f"obstacle site {site} blocks the exit door")

    def accessible_sites(self) -> int:
        return self.n_cols * self.n_rows - len(set(self.obstacle_sites))

    def initial_counts(self) -> tuple[int, int]:
        """(aware, unaware) initial particle counts.

        Explicit counts win; otherwise floor(occupancy * accessible) split
        evenly, odd remainder going to the unaware species.
        """
        if self.n_aware is not None and self.n_unaware is not None:
            return self.n_aware, self.n_unaware
        total = int(np.floor(self.occupancy * self.accessible_sites()))
        n_aware = total // 2
        return n_aware, total - n_aware


@dataclass
class LatticeState:
    """Mutable occupancy state of one run."""

    occ: np.ndarray          # int8 (n_cols, n_rows)
    t: float = 0.0
    n_unaware: int = 0
    n_aware: int = 0
    n_unaware0: int = 0
    n_aware0: int = 0

    def counts_from_occ(self) -> tuple[int, int]:
        return int(np.sum(self.occ == UNAWARE)), int(np.sum(self.occ == AWARE))


# ---------------------------------------------------------------------------
# Reference rate functions (formula-level, used directly in tests)
# ---------------------------------------------------------------------------

def _check_bond(state: LatticeState, src, dst) -> None:
    si, sj = src
    di, dj = dst
    if abs(si - di) + abs(sj - dj) != 1:
        raise ValueError(f"{src}->{dst} is not a nearest-neighbor bond")
    n_cols, n_rows = state.occ.shape
    for i, j in (src, dst):
        if not (0 <= i < n_cols and 0 <= j < n_rows):
            raise ValueError(f"site ({i}, {j}) outside the lattice")


def hop_rate_unaware(state: LatticeState, src, dst) -> float:
    """Unaware hop rate over the bond src -> dst (direction-independent)."""
    _check_bond(state, src, dst)
    if state.occ[src] == BLOCKED or state.occ[dst] == BLOCKED:
        return 0.0
    eta_u = 1.0 if state.occ[src] == UNAWARE else 0.0
    tgt_u = 1.0 if state.occ[dst] == UNAWARE else 0.0
    tgt_a = 1.0 if state.occ[dst] == AWARE else 0.0
    return eta_u * (1.0 - tgt_u - tgt_a)


def hop_rate_aware(state: LatticeState, src, dst, cfg: LatticeConfig) -> float:
    """Aware hop rate: up-biased, door-seeking sideways, never down,
    vertical-only inside the door column band."""
    _check_bond(state, src, dst)
    if state.occ[src] == BLOCKED or state.occ[dst] == BLOCKED:
        return 0.0
    eta_a = 1.0 if state.occ[src] == AWARE else 0.0
    tgt_u = 1.0 if state.occ[dst] == UNAWARE else 0.0
    tgt_a = 1.0 if state.occ[dst] == AWARE else 0.0
    exclusion = eta_a * (1.0 - tgt_u - tgt_a)
    si, sj = src
    di, dj = dst
    door_lo, door_hi = cfg.door_cols
    if si == di:                       # vertical bond
        if dj > sj:
            return (1.0 + cfg.drift_y) * exclusion
        return 0.0
    if door_lo <= si <= door_hi:       # in-band: vertical motion only
        return 0.0
    if (di - si) * (door_lo - di) >= 0:
        return (1.0 + cfg.drift_x) * exclusion
    return exclusion


def exit_rate(state: LatticeState, site, cfg: LatticeConfig) -> float:
    """Annihilation rate for the upward bond out of a door site."""
    i, j = site
    door_lo, door_hi = cfg.door_cols
    if j != state.occ.shape[1] - 1 or not (door_lo <= i <= door_hi):
        raise ValueError(f"site {site} is not a door site")
    eta_u = 1.0 if state.occ[i, j] == UNAWARE else 0.0
    eta_a = 1.0 if state.occ[i, j] == AWARE else 0.0
    return eta_u * (1.0 - eta_a) + (1.0 + cfg.drift_y) * eta_a * (1.0 - eta_u)


# ---------------------------------------------------------------------------
# Compiled engine
# ---------------------------------------------------------------------------

@njit(cache=True)
def _move_rate(occ, i, j, d, n_cols, n_rows, door_lo, door_hi, eps_x, eps_y):
    sp = occ[i, j]
    if sp != UNAWARE and sp != AWARE:
        return 0.0
    if d == UP:
        ti, tj = i, j + 1
    elif d == DOWN:
        ti, tj = i, j - 1
    elif d == LEFT:
        ti, tj = i - 1, j
    else:
        ti, tj = i + 1, j
    if tj == n_rows:
        # upward off the top row: door annihilation, walls elsewhere
        if door_lo <= i <= door_hi:
            if sp == UNAWARE:
                return 1.0
            return 1.0 + eps_y
        return 0.0
    if ti < 0 or ti >= n_cols or tj < 0:
        return 0.0
    if occ[ti, tj] != EMPTY:
        return 0.0
    if sp == UNAWARE:
        return 1.0
    if d == UP:
        return 1.0 + eps_y
    if d == DOWN:
        return 0.0
    if door_lo <= i <= door_hi:
        return 0.0
    if (ti - i) * (door_lo - ti) >= 0:
        return 1.0 + eps_x
    return 1.0


@njit(cache=True)
def _build_rates(occ, n_cols, n_rows, door_lo, door_hi, eps_x, eps_y, rates):
    for j in range(n_rows):
        for i in range(n_cols):
            base = (j * n_cols + i) * 4
            for d in range(4):
                rates[base + d] = _move_rate(occ, i, j, d, n_cols, n_rows,
                                             door_lo, door_hi, eps_x, eps_y)


@njit(cache=True)
def _fenwick_build(rates, tree):
    n = rates.size
    for k in range(n + 1):
        tree[k] = 0.0
    for idx in range(1, n + 1):
        tree[idx] += rates[idx - 1]
        parent = idx + (idx & (-idx))
        if parent <= n:
            tree[parent] += tree[idx]


@njit(cache=True)
def _fenwick_add(tree, slot, delta):
    idx = slot + 1
    n = tree.size - 1
    while idx <= n:
        tree[idx] += delta
        idx += idx & (-idx)


@njit(cache=True)
def _fenwick_total(tree):
    n = tree.size - 1
    total = 0.0
    idx = n
    while idx > 0:
        total += tree[idx]
        idx -= idx & (-idx)
    return total


@njit(cache=True)
def _fenwick_find(tree, u):
    """Smallest 0-based slot whose prefix sum exceeds u."""
    n = tree.size - 1
    bit = 1
    while (bit << 1) <= n:
        bit <<= 1
    idx = 0
    while bit:
        nxt = idx + bit
        if nxt <= n and tree[nxt] <= u:
            u -= tree[nxt]
            idx = nxt
        bit >>= 1
    return idx


@njit(cache=True)
def _refresh_site(occ, rates, tree, i, j, n_cols, n_rows, door_lo, door_hi, eps_x, eps_y):
    base = (j * n_cols + i) * 4
    for d in range(4):
        r = _move_rate(occ, i, j, d, n_cols, n_rows, door_lo, door_hi, eps_x, eps_y)
        delta = r - rates[base + d]
        if delta != 0.0:
            rates[base + d] = r
            _fenwick_add(tree, base + d, delta)


@njit(cache=True)
def _refresh_around(occ, rates, tree, i, j, n_cols, n_rows, door_lo, door_hi, eps_x, eps_y):
    _refresh_site(occ, rates, tree, i, j, n_cols, n_rows, door_lo, door_hi, eps_x, eps_y)
    if i > 0:
        _refresh_site(occ, rates, tree, i - 1, j, n_cols, n_rows, door_lo, door_hi, eps_x, eps_y)
    if i < n_cols - 1:
        _refresh_site(occ, rates, tree, i + 1, j, n_cols, n_rows, door_lo, door_hi, eps_x, eps_y)
    if j > 0:
        _refresh_site(occ, rates, tree, i, j - 1, n_cols, n_rows, door_lo, door_hi, eps_x, eps_y)
    if j < n_rows - 1:
        _refresh_site(occ, rates, tree, i, j + 1, n_cols, n_rows, door_lo, door_hi, eps_x, eps_y)


@njit
def _draw(tree, rates, rng):
    """(total, slot, dt): waiting time ~ Exp(total), slot picked with p = rate/total."""
    total = _fenwick_total(tree)
    if total <= 0.0:
        return 0.0, -1, 0.0
    u = rng.random() * total
    slot = _fenwick_find(tree, u)
    if rates[slot] == 0.0:
        # float-drift guard: step to the nearest enabled slot
        lo = slot - 1
        hi = slot + 1
        n = rates.size
        while True:
            if lo >= 0 and rates[lo] > 0.0:
                slot = lo
                break
            if hi < n and rates[hi] > 0.0:
                slot = hi
                break
            lo -= 1
            hi += 1
            if lo < 0 and hi >= n:
                return 0.0, -1, 0.0
    dt = rng.exponential(1.0 / total)
    return total, slot, dt


@njit(cache=True)
def _apply(occ, rates, tree, slot, n_cols, n_rows, door_lo, door_hi, eps_x, eps_y):
    """Execute the transition; returns (status, exited_species).

    status 0 = ok, 2 = illegal transition sampled (catalog corruption).
    """
    d = slot % 4
    i = (slot // 4) % n_cols
    j = slot // (4 * n_cols)
    sp = occ[i, j]
    if sp != UNAWARE and sp != AWARE:
        return 2, 0
    if d == UP:
        ti, tj = i, j + 1
    elif d == DOWN:
        ti, tj = i, j - 1
    elif d == LEFT:
        ti, tj = i - 1, j
    else:
        ti, tj = i + 1, j
    if tj == n_rows:
        if not (door_lo <= i <= door_hi):
            return 2, 0
        occ[i, j] = EMPTY
        _refresh_around(occ, rates, tree, i, j, n_cols, n_rows, door_lo, door_hi, eps_x, eps_y)
        return 0, sp
    if ti < 0 or ti >= n_cols or tj < 0:
        return 2, 0
    if occ[ti, tj] != EMPTY:
        return 2, 0
    occ[ti, tj] = sp
    occ[i, j] = EMPTY
    _refresh_around(occ, rates, tree, i, j, n_cols, n_rows, door_lo, door_hi, eps_x, eps_y)
    _refresh_around(occ, rates, tree, ti, tj, n_cols, n_rows, door_lo, door_hi, eps_x, eps_y)
    return 0, 0


_STATUS_RUNNING = 0
_STATUS_JAMMED = 1
_STATUS_CORRUPT = 2
_STATUS_EMPTY = 3
_STATUS_EVENTS = 4
_STATUS_TIME = 5


@njit
def _run_core(occ, rates, tree, t, n_unaware, n_aware,
              n_cols, n_rows, door_lo, door_hi, eps_x, eps_y,
              t_end, max_events, rebuild_every,
              sample_next, sample_factor,
              samp_t, samp_nu, samp_na, n_samp,
              exit_t, exit_sp, n_exit, rng):
    events = 0
    status = _STATUS_RUNNING
    while True:
        if n_unaware + n_aware == 0:
            status = _STATUS_EMPTY
            break
        if max_events >= 0 and events >= max_events:
            status = _STATUS_EVENTS
            break
        total, slot, dt = _draw(tree, rates, rng)
        if slot < 0:
            status = _STATUS_JAMMED
            break
        t_next = t + dt
        if t_end > 0.0 and t_next > t_end:
            t = t_end
            status = _STATUS_TIME
            break
        # sample points inside (t, t_next) see the pre-event counts
        while sample_next < t_next and n_samp < samp_t.size:
            samp_t[n_samp] = sample_next
            samp_nu[n_samp] = n_unaware
            samp_na[n_samp] = n_aware
            n_samp += 1
            sample_next *= sample_factor
        st, exited = _apply(occ, rates, tree, slot, n_cols, n_rows,
                            door_lo, door_hi, eps_x, eps_y)
        if st != 0:
            status = _STATUS_CORRUPT
            break
        t = t_next
        events += 1
        if exited == UNAWARE:
            n_unaware -= 1
        elif exited == AWARE:
            n_aware -= 1
        if exited != 0 and n_exit < exit_t.size:
            exit_t[n_exit] = t
            exit_sp[n_exit] = exited
            n_exit += 1
        if rebuild_every > 0 and events % rebuild_every == 0:
            _build_rates(occ, n_cols, n_rows, door_lo, door_hi, eps_x, eps_y, rates)
            _fenwick_build(rates, tree)
    return status, t, n_unaware, n_aware, n_samp, n_exit, sample_next, events


# ---------------------------------------------------------------------------
# Python-facing engine
# ---------------------------------------------------------------------------

class RateCatalog:
    """All enabled transitions with a Fenwick tree over their rates.

    Slots are (site, direction) pairs: slot = (row * n_cols + col) * 4 + dir.
    """

    def __init__(self, state: LatticeState, cfg: LatticeConfig):
        self.cfg = cfg
        n_cols, n_rows = state.occ.shape
        self.n_cols, self.n_rows = n_cols, n_rows
        self.door_lo, self.door_hi = cfg.door_cols
        self.rates = np.zeros(n_cols * n_rows * 4)
        self.tree = np.zeros(self.rates.size + 1)
        self.rebuild(state)

    def rebuild(self, state: LatticeState) -> None:
        _build_rates(state.occ, self.n_cols, self.n_rows, self.door_lo, self.door_hi,
                     self.cfg.drift_x, self.cfg.drift_y, self.rates)
        _fenwick_build(self.rates, self.tree)

    @property
    def total_rate(self) -> float:
        return float(_fenwick_total(self.tree))

    def fresh_rates(self, state: LatticeState) -> np.ndarray:
        """Full from-scratch rate table, for equivalence checks against the
        incrementally maintained one."""
        rates = np.zeros_like(self.rates)
        _build_rates(state.occ, self.n_cols, self.n_rows, self.door_lo, self.door_hi,
                     self.cfg.drift_x, self.cfg.drift_y, rates)
        return rates

    def decode(self, slot: int) -> tuple[int, int, int]:
        d = slot % 4
        i = (slot // 4) % self.n_cols
        j = slot // (4 * self.n_cols)
        return i, j, d


def init_lattice(cfg: LatticeConfig, rng) -> LatticeState:
    """Place the initial particles uniformly at random on distinct accessible sites."""
    cfg.validate()
    if isinstance(rng, (int, np.integer)):
        rng = np.random.default_rng(int(rng))
    occ = np.zeros((cfg.n_cols, cfg.n_rows), dtype=np.int8)
    for i, j in cfg.obstacle_sites:
        occ[i - 1, j - 1] = BLOCKED
    free = np.flatnonzero((occ == EMPTY).ravel())
    n_aware, n_unaware = cfg.initial_counts()
    if n_aware + n_unaware > free.size:
        raise OverfullError(
            f"{n_aware + n_unaware} particles requested for {free.size} accessible sites")
    chosen = rng.permutation(free)[: n_aware + n_unaware]
    flat = occ.ravel()
    flat[chosen[:n_aware]] = AWARE
    flat[chosen[n_aware:]] = UNAWARE
    return LatticeState(occ=occ, t=0.0,
                        n_unaware=n_unaware, n_aware=n_aware,
                        n_unaware0=n_unaware, n_aware0=n_aware)


def kmc_step(state: LatticeState, catalog: RateCatalog, rng) -> tuple[tuple, float]:
    """One rejection-free event: returns ((col, row, dir, species, exited), dt).

    Raises EmptySystemError when the total rate is zero (all gone or jammed).
    """
    total, slot, dt = _draw(catalog.tree, catalog.rates, rng)
    if slot < 0:
        raise EmptySystemError("no enabled transition")
    i, j, d = catalog.decode(slot)
    species = int(state.occ[i, j])
    st, exited = _apply(state.occ, catalog.rates, catalog.tree, slot,
                        catalog.n_cols, catalog.n_rows, catalog.door_lo, catalog.door_hi,
                        catalog.cfg.drift_x, catalog.cfg.drift_y)
    if st != 0:
        raise LatticeError("catalog sampled an illegal transition (bookkeeping bug)")
    state.t += dt
    if exited == UNAWARE:
        state.n_unaware -= 1
    elif exited == AWARE:
        state.n_aware -= 1
    return (i, j, d, species, exited != 0), dt


@dataclass
class LatticeRun:
    """Sampled time series plus exact exit-event times of one lattice run."""

    times: np.ndarray
    n_aware: np.ndarray
    n_unaware: np.ndarray
    exit_times: np.ndarray
    exit_species: np.ndarray     # AWARE / UNAWARE codes
    state: LatticeState
    status: str
    events: int

    @property
    def n_aware0(self) -> int:
        return self.state.n_aware0

    @property
    def n_unaware0(self) -> int:
        return self.state.n_unaware0

    def exit_times_of(self, species: int) -> np.ndarray:
        return self.exit_times[self.exit_species == species]


def run_lattice(cfg: LatticeConfig, seed: int, *, t_end: float | None = None,
                max_events: int | None = None, sample_start: float = 0.1,
                sample_factor: float = 1.2, rebuild_every: int = 100_000) -> LatticeRun:
    """Run the KMC loop until t_end / max_events / an empty lattice.

    The (t, counts) series is sampled at geometric times sample_start * factor^k
    (resolving the log-time axis) plus the final time.  Deterministic per seed.
    """
    rng = np.random.default_rng(seed)
    state = init_lattice(cfg, rng)
    catalog = RateCatalog(state, cfg)

    samp_t = np.zeros(_SAMPLE_CAP)
    samp_nu = np.zeros(_SAMPLE_CAP, dtype=np.int64)
    samp_na = np.zeros(_SAMPLE_CAP, dtype=np.int64)
    cap = state.n_aware0 + state.n_unaware0
    exit_t = np.zeros(max(cap, 1))
    exit_sp = np.zeros(max(cap, 1), dtype=np.int8)

    status, t, n_u, n_a, n_samp, n_exit, _, events = _run_core(
        state.occ, catalog.rates, catalog.tree,
        state.t, state.n_unaware, state.n_aware,
        catalog.n_cols, catalog.n_rows, catalog.door_lo, catalog.door_hi,
        cfg.drift_x, cfg.drift_y,
        -1.0 if t_end is None else float(t_end),
        -1 if max_events is None else int(max_events),
        int(rebuild_every),
        float(sample_start), float(sample_factor),
        samp_t, samp_nu, samp_na, 0,
        exit_t, exit_sp, 0, rng)

    state.t = t
    state.n_unaware = n_u
    state.n_aware = n_a
    if status == _STATUS_JAMMED:
        raise EmptySystemError(f"zero total rate with {n_u + n_a} particles remaining")
    if status == _STATUS_CORRUPT:
        raise LatticeError("catalog sampled an illegal transition (bookkeeping bug)")
    name = {_STATUS_EMPTY: "empty", _STATUS_EVENTS: "max_events", _STATUS_TIME: "t_end"}[status]

    times = np.append(samp_t[:n_samp], t)
    series_na = np.append(samp_na[:n_samp], n_a)
    series_nu = np.append(samp_nu[:n_samp], n_u)
    return LatticeRun(times=times, n_aware=series_na, n_unaware=series_nu,
                      exit_times=exit_t[:n_exit].copy(),
                      exit_species=exit_sp[:n_exit].copy(),
                      state=state, status=name, events=events)


def occupancy_art(state: LatticeState) -> str:
    """ASCII rendering, top row first: '.' empty, 'U', 'A', '#' obstacle."""
    n_cols, n_rows = state.occ.shape
    lines = []
    for j in range(n_rows - 1, -1, -1):
        lines.append("".join(_OCC_CHARS[int(state.occ[i, j])] for i in range(n_cols)))
    return "\n".join(lines) + "\n"


def species_name(code: int) -> str:
    return _SPECIES_NAME[code]
