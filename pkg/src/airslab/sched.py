"""Max-min throughput scheduling over a pluggable SE predictor.

The heuristic pipeline has three stages: (1) cluster UEs by their per-panel
SE vectors, stable-match clusters to panels and spread each cluster's
bottleneck UEs across slots; (2) inside each slot, alternate stable
matching of panels to UEs with iterative RB-ratio balancing; (3) swap UEs
between the currently worst and best slots while that improves the global
minimum.  An exact reference solves, for every enumerable association, the
max-min LP over RB ratios with a dense Bland-rule simplex.
"""

from __future__ import annotations

import itertools
import math
import time
from dataclasses import dataclass, field
from typing import Optional, Sequence

import networkx as nx
import numpy as np

from .scene import SceneConfig


@dataclass
class SeMatrix:
    """Per-UE SE predictions: column 0 is BS-only, column i+1 is panel i."""

    eta: np.ndarray  # (U, I+1)
    n_clamped: int = 0  # negative predictions clamped to zero


def build_se_matrix(predictor, scene: SceneConfig) -> SeMatrix:
    rows = []
    for ue in scene.ues:
        if hasattr(predictor, "se_vector"):
            rows.append(np.asarray(predictor.se_vector(scene, ue), dtype=float))
        else:
            rows.append(
                np.array(
                    [predictor.predict(scene, ue, None)]
                    + [predictor.predict(scene, ue, i) for i in range(scene.n_airs)]
                )
            )
    eta = np.stack(rows) if rows else np.zeros((0, scene.n_airs + 1))
    if not np.all(np.isfinite(eta)):
        raise ValueError("predictor produced non-finite SE values")
    n_clamped = int(np.sum(eta < 0.0))
    return SeMatrix(eta=np.maximum(eta, 0.0), n_clamped=n_clamped)


# ---------------------------------------------------------------------------
# Constrained k-means (minimum cluster sizes via min-cost flow)
# ---------------------------------------------------------------------------


def ckmeans(vectors: np.ndarray, k: int, min_size: int, seed: int = 0) -> np.ndarray:
    """Lloyd iterations with a min-cost-flow assignment enforcing sizes >= min_size."""
    x = np.asarray(vectors, dtype=float)
    u = x.shape[0]
    if u < k * min_size:
        raise ValueError(
            f"infeasible minimum cluster size: {u} points cannot fill {k} clusters of {min_size}"
        )
    rng = np.random.default_rng(seed)
    centers = x[rng.choice(u, size=k, replace=False)].copy()
    labels = np.full(u, -1, dtype=int)
    for _ in range(100):
        new_labels = _constrained_assign(x, centers, min_size)
        if np.array_equal(new_labels, labels):
            break
        labels = new_labels
        for c in range(k):
            sel = labels == c
            if sel.any():
                centers[c] = x[sel].mean(axis=0)
    return labels


def _constrained_assign(x: np.ndarray, centers: np.ndarray, min_size: int) -> np.ndarray:
    u, k = x.shape[0], centers.shape[0]
    d2 = ((x[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
    top = d2.max()
    cost = np.zeros_like(d2, dtype=np.int64)
    if top > 0.0:
        cost = np.round(d2 / top * 1e9).astype(np.int64)
    g = nx.DiGraph()
    sink = u + k
    for p in range(u):
        g.add_node(p, demand=-1)
    for c in range(k):
        g.add_node(u + c, demand=min_size)
        for p in range(u):
            g.add_edge(p, u + c, weight=int(cost[p, c]), capacity=1)
        g.add_edge(u + c, sink, weight=0)
    g.add_node(sink, demand=u - k * min_size)
    flow = nx.min_cost_flow(g)
    labels = np.full(u, -1, dtype=int)
    for p in range(u):
        for tgt, amount in flow[p].items():
            if amount > 0:
                labels[p] = tgt - u
    return labels


# ---------------------------------------------------------------------------
# Stable matching (deferred acceptance, proposer-optimal)
# ---------------------------------------------------------------------------


def gale_shapley(proposer_prefs: dict, acceptor_prefs: dict) -> dict:
    """Match proposers to acceptors; lists contain only acceptable partners."""
    rank = {
        a: {p: r for r, p in enumerate(prefs)} for a, prefs in acceptor_prefs.items()
    }
    next_idx = {p: 0 for p in proposer_prefs}
    engaged: dict = {}  # acceptor -> proposer
    free = list(proposer_prefs.keys())
    while free:
        p = free.pop(0)
        prefs = proposer_prefs[p]
        while next_idx[p] < len(prefs):
            a = prefs[next_idx[p]]
            next_idx[p] += 1
            if a not in rank or p not in rank[a]:
                continue  # acceptor finds this proposer unacceptable
            cur = engaged.get(a)
            if cur is None:
                engaged[a] = p
                break
            if rank[a][p] < rank[a][cur]:
                engaged[a] = p
                free.append(cur)
                break
        # exhausted list: proposer stays unmatched
    return {p: a for a, p in engaged.items()}


# ---------------------------------------------------------------------------
# RB-ratio balancing inside one slot
# ---------------------------------------------------------------------------

_IB_MAX_ITER = 500_000


def ib_balance(
    etas: np.ndarray,
    s_rb: int,
    eps: float,
    start: Optional[np.ndarray] = None,
) -> tuple[np.ndarray, float, np.ndarray]:
    """Pairwise best/worst throughput transfers until the gap drops below eps.

    Returns (ratios, common throughput among active UEs, active mask).
    UEs with zero SE are excluded with ratio 0.
    """
    if eps <= 0.0:
        raise ValueError("eps must be > 0")
    e = np.asarray(etas, dtype=float)
    n = e.size
    if n == 0:
        return np.zeros(0), math.inf, np.zeros(0, dtype=bool)
    active = e > 0.0
    m = int(active.sum())
    ratios = np.zeros(n)
    if m == 0:
        return ratios, 0.0, active
    if start is not None and np.sum(np.asarray(start)[active]) > 0.0:
        s0 = np.where(active, np.asarray(start, dtype=float), 0.0)
        ratios = s0 / s0.sum()
    else:
        ratios[active] = 1.0 / m
    idx = np.flatnonzero(active)
    ea = e[idx]
    ra = ratios[idx]
    for _ in range(_IB_MAX_ITER):
        r = ra * s_rb * ea
        hi = int(np.argmax(r))
        lo = int(np.argmin(r))
        if r[hi] - r[lo] <= eps:
            break
        delta = (ra[hi] * ea[hi] - ra[lo] * ea[lo]) / (ea[hi] + ea[lo])
        ra[hi] -= delta
        ra[lo] += delta
    ratios[idx] = ra
    common = float(np.min(ra * s_rb * ea))
    return ratios, common, active


# ---------------------------------------------------------------------------
# Per-slot refinement and cross-slot swapping
# ---------------------------------------------------------------------------


@dataclass
class SlotState:
    ues: list[int]
    assoc: dict[int, int]  # panel -> ue
    ratios: dict[int, float]
    common: float  # balanced common throughput among positive-SE members


def _effective_eta(ues: Sequence[int], eta: np.ndarray, assoc: dict[int, int]) -> np.ndarray:
    serving = {ue: panel for panel, ue in assoc.items()}
    return np.array(
        [eta[u, serving[u] + 1] if u in serving else eta[u, 0] for u in ues]
    )


def _balanced_state(
    ues: Sequence[int],
    eta: np.ndarray,
    assoc: dict[int, int],
    s_rb: int,
    eps: float,
    start: Optional[dict[int, float]] = None,
) -> SlotState:
    ues = list(ues)
    if not ues:
        return SlotState(ues=[], assoc={}, ratios={}, common=math.inf)
    eff = _effective_eta(ues, eta, assoc)
    s0 = np.array([start.get(u, 0.0) for u in ues]) if start else None
    ratios, common, _ = ib_balance(eff, s_rb, eps, start=s0)
    return SlotState(
        ues=ues,
        assoc=dict(assoc),
        ratios={u: float(r) for u, r in zip(ues, ratios)},
        common=common,
    )


def _gs_slot_match(ues: Sequence[int], eta: np.ndarray, n_airs: int) -> dict[int, int]:
    """Panels propose to slot members; only mutually beneficial pairs are listed."""
    panel_prefs = {}
    for i in range(n_airs):
        gains = [(eta[u, i + 1] - eta[u, 0], u) for u in ues if eta[u, i + 1] > eta[u, 0]]
        gains.sort(key=lambda t: (-t[0], t[1]))
        panel_prefs[i] = [u for _, u in gains]
    ue_prefs = {}
    for u in ues:
        opts = [(eta[u, i + 1], i) for i in range(n_airs) if eta[u, i + 1] > eta[u, 0]]
        opts.sort(key=lambda t: (-t[0], t[1]))
        ue_prefs[u] = [i for _, i in opts]
    return gale_shapley(panel_prefs, ue_prefs)


def per_slot_maxmin(
    ues: Sequence[int],
    eta: np.ndarray,
    s_rb: int,
    n_max: int = 10,
    eps: float = 1e-3,
    assoc0: Optional[dict[int, int]] = None,
    ratios0: Optional[dict[int, float]] = None,
) -> SlotState:
    """Alternate panel-UE stable matching and ratio balancing; never regresses."""
    n_airs = eta.shape[1] - 1
    best = _balanced_state(ues, eta, assoc0 or {}, s_rb, eps, start=ratios0)
    if not best.ues:
        return best
    for _ in range(n_max):
        assoc = _gs_slot_match(best.ues, eta, n_airs)
        if assoc == best.assoc:
            break
        cand = _balanced_state(best.ues, eta, assoc, s_rb, eps, start=best.ratios)
        if cand.common > best.common + 1e-12:
            best = cand
        else:
            break
    return best


_MAX_SWAP_ROUNDS = 1000


def cross_slot_swap(
    states: list[SlotState],
    eta: np.ndarray,
    s_rb: int,
    xi: float = 1e-2,
    n_max: int = 10,
    eps: float = 1e-3,
) -> list[SlotState]:
    """Swap one UE between the worst and best slots while the global minimum improves."""
    if xi <= 0.0:
        raise ValueError("xi must be > 0")
    states = list(states)
    if len(states) < 2:
        return states
    for _ in range(_MAX_SWAP_ROUNDS):
        occupied = [q for q, st in enumerate(states) if st.ues]
        if len(occupied) < 2:
            break
        commons = {q: states[q].common for q in occupied}
        q_min = min(occupied, key=lambda q: (commons[q], q))
        q_max = max(occupied, key=lambda q: (commons[q], -q))
        if q_min == q_max or commons[q_max] - commons[q_min] <= xi:
            break
        st_min, st_max = states[q_min], states[q_max]
        out_ue = max(st_min.ues, key=lambda u: (st_min.ratios.get(u, 0.0), -u))
        current_global = min(commons.values())
        adopted = False
        for cand in sorted(st_max.ues, key=lambda u: (st_max.ratios.get(u, 0.0), u)):
            new_min = _swapped_state(st_min, out_ue, cand, st_max, eta, s_rb, n_max, eps)
            new_max = _swapped_state(st_max, cand, out_ue, st_min, eta, s_rb, n_max, eps)
            trial = dict(commons)
            trial[q_min] = new_min.common
            trial[q_max] = new_max.common
            if min(trial.values()) > current_global + 1e-12:
                states[q_min] = new_min
                states[q_max] = new_max
                adopted = True
                break
        if not adopted:
            break
    return states


def _swapped_state(
    st: SlotState,
    leaving: int,
    arriving: int,
    other: SlotState,
    eta: np.ndarray,
    s_rb: int,
    n_max: int,
    eps: float,
) -> SlotState:
    ues = [u for u in st.ues if u != leaving] + [arriving]
    # arriving UE keeps its old share, then everything rescales to the budget
    start = {u: st.ratios.get(u, 0.0) for u in ues}
    start[arriving] = other.ratios.get(arriving, 0.0)
    assoc0 = {i: u for i, u in st.assoc.items() if u != leaving}
    return per_slot_maxmin(ues, eta, s_rb, n_max, eps, assoc0=assoc0, ratios0=start)


# ---------------------------------------------------------------------------
# Stage 1: initial grouping
# ---------------------------------------------------------------------------


def stage1_grouping(
    eta: np.ndarray, scene: SceneConfig, seed: int = 0
) -> tuple[list[list[int]], list[dict[int, int]]]:
    """Initial per-slot UE groups and panel associations."""
    u_n = eta.shape[0]
    n_airs = eta.shape[1] - 1
    q_n = scene.n_slots
    slots: list[list[int]] = [[] for _ in range(q_n)]
    assoc: list[dict[int, int]] = [{} for _ in range(q_n)]

    if n_airs == 0:
        order = sorted(range(u_n), key=lambda u: (-eta[u, 0], u))
        for j, u in enumerate(order):
            slots[j % q_n].append(u)
        return slots, assoc

    if u_n <= n_airs:
        # degenerate small instance: spread UEs one per slot, greedily pick panels
        order = sorted(range(u_n), key=lambda u: (-np.max(eta[u, 1:]), u))
        for j, u in enumerate(order):
            q = j % q_n
            slots[q].append(u)
            taken = set(assoc[q])
            opts = [
                (eta[u, i + 1], i)
                for i in range(n_airs)
                if i not in taken and eta[u, i + 1] > eta[u, 0]
            ]
            if opts:
                _, i = max(opts, key=lambda t: (t[0], -t[1]))
                assoc[q][i] = u
        return slots, assoc

    u0 = min(u_n // n_airs, q_n)
    labels = ckmeans(eta[:, 1:], n_airs, u0, seed=seed)
    clusters = [sorted(np.flatnonzero(labels == c).tolist()) for c in range(n_airs)]

    # stable matching between clusters and panels
    panel_prefs = {}
    for i in range(n_airs):
        gains = [
            (float(np.mean(eta[cl, i + 1] - eta[cl, 0])) if cl else -math.inf, c)
            for c, cl in enumerate(clusters)
        ]
        gains.sort(key=lambda t: (-t[0], t[1]))
        panel_prefs[i] = [c for _, c in gains]
    cluster_prefs = {}
    for c, cl in enumerate(clusters):
        means = [
            (float(np.mean(eta[cl, i + 1])) if cl else -math.inf, i)
            for i in range(n_airs)
        ]
        means.sort(key=lambda t: (-t[0], t[1]))
        cluster_prefs[c] = [i for _, i in means]
    match = gale_shapley(panel_prefs, cluster_prefs)  # panel -> cluster

    leftovers: list[int] = []
    for i in range(n_airs):
        c = match.get(i)
        if c is None:
            continue
        members = sorted(clusters[c], key=lambda u: (eta[u, 0], u))
        top = members[:q_n]  # bottleneck UEs, poorest first
        for q, u in enumerate(top):
            slots[q].append(u)
            assoc[q][i] = u
        leftovers.extend(members[q_n:])
    leftovers.sort(key=lambda u: (-eta[u, 0], u))
    fill = sorted(range(q_n), key=lambda q: (len(slots[q]), q))
    for j, u in enumerate(leftovers):
        slots[fill[j % q_n]].append(u)
    return slots, assoc


# ---------------------------------------------------------------------------
# Schedules
# ---------------------------------------------------------------------------


@dataclass
class Schedule:
    n_slots: int
    assoc: list[dict[int, int]]
    rho: np.ndarray  # (U, Q)
    throughput: np.ndarray  # (U,)
    slot_of_ue: Optional[list[int]] = None
    stage_trace: dict[str, float] = field(default_factory=dict)
    wall_ms: Optional[dict[str, float]] = None
    zero_se_ues: list[int] = field(default_factory=list)

    @property
    def min_throughput(self) -> float:
        return float(np.min(self.throughput)) if self.throughput.size else 0.0

    def to_json_obj(self, include_timing: bool = False) -> dict:
        obj = {
            "n_slots": self.n_slots,
            "assoc": [{str(i): int(u) for i, u in sorted(a.items())} for a in self.assoc],
            "rho": [[float(v) for v in row] for row in self.rho],
            "throughput": [float(v) for v in self.throughput],
            "slot_of_ue": self.slot_of_ue,
            "stage_trace": {k: float(v) for k, v in self.stage_trace.items()},
            "zero_se_ues": list(self.zero_se_ues),
            "wall_ms": (
                {k: float(v) for k, v in self.wall_ms.items()}
                if (include_timing and self.wall_ms)
                else None
            ),
        }
        return obj


def schedule_throughput(
    assoc: list[dict[int, int]], rho: np.ndarray, eta: np.ndarray, s_rb: int
) -> np.ndarray:
    u_n, q_n = rho.shape
    out = np.zeros(u_n)
    for q in range(q_n):
        serving = {ue: panel for panel, ue in assoc[q].items()}
        for u in range(u_n):
            e = eta[u, serving[u] + 1] if u in serving else eta[u, 0]
            out[u] += rho[u, q] * s_rb * e
    return out


def validate_schedule(
    sched: Schedule, eta: np.ndarray, s_rb: int, tol: float = 1e-9
) -> None:
    """Feasibility: ratio bounds and budgets, injective associations, consistent R."""
    u_n, q_n = sched.rho.shape
    if q_n != sched.n_slots or len(sched.assoc) != q_n:
        raise ValueError("schedule shape mismatch")
    if np.any(sched.rho < -tol) or np.any(sched.rho > 1.0 + tol):
        raise ValueError("RB ratios out of [0, 1]")
    sums = sched.rho.sum(axis=0)
    if np.any(sums > 1.0 + tol):
        raise ValueError("per-slot RB budget exceeded")
    for q, a in enumerate(sched.assoc):
        ues = list(a.values())
        if len(set(ues)) != len(ues):
            raise ValueError(f"slot {q}: a UE is served by multiple panels")
        for i, u in a.items():
            if not (0 <= i < eta.shape[1] - 1) or not (0 <= u < u_n):
                raise ValueError(f"slot {q}: association out of range")
    if sched.slot_of_ue is not None:
        for u, q in enumerate(sched.slot_of_ue):
            off = [qq for qq in range(q_n) if qq != q]
            if off and np.any(sched.rho[u, off] > tol):
                raise ValueError(f"UE {u}: ratio mass outside its slot")
        for q, a in enumerate(sched.assoc):
            for u in a.values():
                if sched.slot_of_ue[u] != q:
                    raise ValueError(f"slot {q}: serves UE {u} scheduled elsewhere")
    expect = schedule_throughput(sched.assoc, sched.rho, eta, s_rb)
    if np.any(np.abs(expect - sched.throughput) > 1e-6 * np.maximum(1.0, np.abs(expect))):
        raise ValueError("stored throughput inconsistent with ratios")


# ---------------------------------------------------------------------------
# SM-IB pipeline
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SmIbParams:
    eps: float = 1e-3
    xi: float = 1e-2
    n_max: int = 10
    seed: int = 0


def _min_over_all(states: list[SlotState], eta: np.ndarray, s_rb: int) -> float:
    vals = []
    for st in states:
        eff = _effective_eta(st.ues, eta, st.assoc)
        for u, e in zip(st.ues, eff):
            vals.append(st.ratios.get(u, 0.0) * s_rb * e)
    return float(min(vals)) if vals else 0.0


def sm_ib(
    predictor,
    scene: SceneConfig,
    params: SmIbParams = SmIbParams(),
    se: Optional[SeMatrix] = None,
) -> Schedule:
    """Three-stage heuristic schedule; deterministic per seed."""
    if se is None:
        se = build_se_matrix(predictor, scene)
    eta = se.eta
    s_rb = scene.n_rb
    u_n = eta.shape[0]
    q_n = scene.n_slots

    t0 = time.perf_counter()
    slots, assoc0 = stage1_grouping(eta, scene, seed=params.seed)
    states = []
    for q in range(q_n):
        n = len(slots[q])
        ratios0 = {u: 1.0 / n for u in slots[q]} if n else {}
        states.append(
            SlotState(ues=slots[q], assoc=assoc0[q], ratios=ratios0, common=0.0)
        )
    stage1_min = _min_over_all(states, eta, s_rb)
    t1 = time.perf_counter()

    states = [
        per_slot_maxmin(
            st.ues, eta, s_rb, params.n_max, params.eps, st.assoc, st.ratios
        )
        for st in states
    ]
    stage2_min = _min_over_all(states, eta, s_rb)
    t2 = time.perf_counter()

    states = cross_slot_swap(states, eta, s_rb, params.xi, params.n_max, params.eps)
    stage3_min = _min_over_all(states, eta, s_rb)
    t3 = time.perf_counter()

    rho = np.zeros((u_n, q_n))
    slot_of_ue = [0] * u_n
    assoc = []
    zero_ues: list[int] = []
    for q, st in enumerate(states):
        assoc.append(dict(st.assoc))
        for u in st.ues:
            slot_of_ue[u] = q
            rho[u, q] = st.ratios.get(u, 0.0)
            if st.ratios.get(u, 0.0) == 0.0:
                zero_ues.append(u)
    throughput = schedule_throughput(assoc, rho, eta, s_rb)
    sched = Schedule(
        n_slots=q_n,
        assoc=assoc,
        rho=rho,
        throughput=throughput,
        slot_of_ue=slot_of_ue,
        stage_trace={"stage1": stage1_min, "stage2": stage2_min, "stage3": stage3_min},
        wall_ms={
            "stage1": (t1 - t0) * 1e3,
            "stage2": (t2 - t1) * 1e3,
            "stage3": (t3 - t2) * 1e3,
        },
        zero_se_ues=sorted(zero_ues),
    )
    validate_schedule(sched, eta, s_rb)
    return sched


# ---------------------------------------------------------------------------
# Exact reference: LP over ratios, enumeration over associations
# ---------------------------------------------------------------------------


def exact_maxmin_lp(
    eta_uq: np.ndarray, s_rb: int, tol: float = 1e-9, max_pivots: int = 100_000
) -> tuple[float, np.ndarray]:
    """max t s.t. sum_q rho[u,q]*S*eta[u,q] >= t, per-slot sum rho <= 1, rho >= 0.

    Dense tableau simplex with Bland's rule (degenerate-safe); returns the
    certified optimal value and one optimal ratio matrix.
    """
    eta = np.asarray(eta_uq, dtype=float)
    if eta.ndim != 2:
        raise ValueError("eta must be (U, Q)")
    if np.any(eta < 0.0) or not np.all(np.isfinite(eta)):
        raise ValueError("eta must be finite and non-negative")
    u_n, q_n = eta.shape
    n = u_n * q_n + 1  # ratios then t
    m = u_n + q_n
    tab = np.zeros((m + 1, n + m + 1))
    for u in range(u_n):
        tab[u, u * q_n : (u + 1) * q_n] = -float(s_rb) * eta[u]
        tab[u, u_n * q_n] = 1.0
    for q in range(q_n):
        tab[u_n + q, np.arange(u_n) * q_n + q] = 1.0
        tab[u_n + q, -1] = 1.0
    tab[:m, n : n + m] = np.eye(m)
    tab[m, u_n * q_n] = 1.0  # maximize t
    basis = list(range(n, n + m))

    for _ in range(max_pivots):
        red = tab[m, : n + m]
        entering = np.flatnonzero(red > tol)
        if entering.size == 0:
            break
        j = int(entering[0])  # Bland: lowest index enters
        col = tab[:m, j]
        pos = col > tol
        if not pos.any():
            raise ArithmeticError("LP unbounded (malformed input)")
        ratios = np.full(m, np.inf)
        ratios[pos] = tab[:m, -1][pos] / col[pos]
        rmin = ratios.min()
        cand = np.flatnonzero(ratios <= rmin + 1e-12)
        i = int(min(cand, key=lambda r: basis[r]))  # Bland: lowest basis index leaves
        piv = tab[i, j]
        tab[i, :] /= piv
        other = tab[:, j].copy()
        other[i] = 0.0
        tab -= np.outer(other, tab[i, :])
        basis[i] = j
    else:
        raise ArithmeticError("cycling guard exceeded")

    x = np.zeros(n + m)
    for r, bv in enumerate(basis):
        x[bv] = tab[r, -1]
    rho = np.maximum(x[: u_n * q_n].reshape(u_n, q_n), 0.0)
    return float(x[u_n * q_n]), rho


def _slot_assignments(u_n: int, n_airs: int) -> list[tuple[tuple[int, int], ...]]:
    out: list[tuple[tuple[int, int], ...]] = []
    for k in range(min(n_airs, u_n) + 1):
        for panels in itertools.combinations(range(n_airs), k):
            for ues in itertools.permutations(range(u_n), k):
                out.append(tuple(zip(panels, ues)))
    return out


def exact_enum(
    predictor,
    scene: SceneConfig,
    guard: int = 10_000_000,
    se: Optional[SeMatrix] = None,
) -> Schedule:
    """Exhaustive association search with an LP per combination (small instances)."""
    if se is None:
        se = build_se_matrix(predictor, scene)
    eta = se.eta
    u_n = eta.shape[0]
    n_airs = eta.shape[1] - 1
    q_n = scene.n_slots
    per_slot = _slot_assignments(u_n, n_airs)
    total = len(per_slot) ** q_n
    if total > guard:
        raise ValueError(
            f"enumeration needs {total} LP solves, exceeding the guard of {guard}; "
            "use a smaller instance"
        )
    base = np.tile(eta[:, 0][:, None], (1, q_n))
    best = None
    for combo in itertools.product(per_slot, repeat=q_n):
        eta_uq = base.copy()
        for q, asg in enumerate(combo):
            for i, u in asg:
                eta_uq[u, q] = eta[u, i + 1]
        t, rho = exact_maxmin_lp(eta_uq, scene.n_rb)
        if best is None or t > best[0] + 1e-12:
            best = (t, combo, rho)
    assert best is not None
    _, combo, rho = best
    assoc = [dict(asg) for asg in combo]
    throughput = schedule_throughput(assoc, rho, eta, scene.n_rb)
    sched = Schedule(
        n_slots=q_n,
        assoc=assoc,
        rho=rho,
        throughput=throughput,
        slot_of_ue=None,
        stage_trace={"optimum": float(best[0])},
    )
    validate_schedule(sched, eta, scene.n_rb)
    return sched


def random_schedule(scene: SceneConfig, se: SeMatrix, seed: int = 0) -> Schedule:
    """Random slot partition, random panel pairing, equal ratios per slot."""
    eta = se.eta
    u_n = eta.shape[0]
    n_airs = eta.shape[1] - 1
    q_n = scene.n_slots
    rng = np.random.default_rng(seed)
    perm = rng.permutation(u_n)
    groups = [g.tolist() for g in np.array_split(perm, q_n)]
    rho = np.zeros((u_n, q_n))
    slot_of_ue = [0] * u_n
    assoc: list[dict[int, int]] = []
    for q, group in enumerate(groups):
        a: dict[int, int] = {}
        if group and n_airs:
            k = min(n_airs, len(group))
            panels = rng.choice(n_airs, size=k, replace=False)
            served = rng.choice(len(group), size=k, replace=False)
            a = {int(i): int(group[j]) for i, j in zip(panels, served)}
        assoc.append(a)
        for u in group:
            slot_of_ue[u] = q
            rho[u, q] = 1.0 / len(group)
    throughput = schedule_throughput(assoc, rho, eta, scene.n_rb)
    sched = Schedule(
        n_slots=q_n,
        assoc=assoc,
        rho=rho,
        throughput=throughput,
        slot_of_ue=slot_of_ue,
    )
    validate_schedule(sched, eta, scene.n_rb)
    return sched
