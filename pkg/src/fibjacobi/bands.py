"""Band sets: sigma_k, nested covers, measures, escape approximations.

sigma_k = {E : |x_k(E)| <= 1} is a union of at most F_k closed bands, one
per zero of x_k.  The solver exploits three exact structural facts:

* containment: sigma_k lies inside sigma_{k-1} union sigma_{k-2}, since two
  consecutive half-traces beyond 1 force escape (so the complement of the
  union is trace-expanding at level k);
* counting: x_k has exactly F_k simple real zeros, so a sign-change search
  that has found F_k zeros has found them all;
* unimodality: |x_k| has exactly one interior peak between consecutive
  zeros, so golden-section peak search and bracketed bisection of
  |x_k| - 1 are exact, and a peak at or below 1 certifies a closed gap.

Levels are computed bottom-up; each level's bands become the next level's
search containers, which keeps the work proportional to the band structure
instead of the window volume.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .tracemap import HoppingPair, escape_grid, trace_value
from .words import fibonacci

DEFAULT_TOL = 1e-10
MIN_TOL = 1e-13
ENERGY_MARGIN = 1e-6
# Band edges closer than MERGE_FACTOR * tol merge into one band.
MERGE_FACTOR = 10.0
# Refinement abort: total sign-grid points per level.
GRID_CAP = 1 << 24

_INVPHI = (math.sqrt(5.0) - 1.0) / 2.0


class RootIsolationError(RuntimeError):
    """Zero or edge isolation failed; carries what was found where."""

    def __init__(self, level: int, found: int, expected: int, points: int, detail: str = ""):
        self.level = level
        self.found = found
        self.expected = expected
        self.points = points
        msg = (
            f"level {level}: isolated {found} of {expected} trace zeros "
            f"using {points} grid points"
        )
        super().__init__(msg + (f" ({detail})" if detail else ""))


@dataclass(frozen=True)
class Interval:
    """Closed energy interval."""

    lo: float
    hi: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.lo) and math.isfinite(self.hi)) or self.lo > self.hi:
            raise ValueError(f"invalid interval ({self.lo}, {self.hi})")

    @property
    def length(self) -> float:
        return self.hi - self.lo

    def contains(self, x: float) -> bool:
        return self.lo <= x <= self.hi


@dataclass(frozen=True)
class EnergyWindow:
    """Search window; must contain the norm-bound interval of the operator."""

    lo: float
    hi: float

    @property
    def width(self) -> float:
        return self.hi - self.lo


def energy_window(p: HoppingPair, margin: float = ENERGY_MARGIN) -> EnergyWindow:
    """Norm-bound window with a margin, since edges can sit exactly at it."""
    m = p.norm_bound
    return EnergyWindow(-m - margin, m + margin)


@dataclass(frozen=True)
class BandSet:
    """Sorted disjoint closed bands with their provenance."""

    bands: tuple[Interval, ...]
    kind: str
    level: int
    params: HoppingPair
    tol: float
    merged_gaps: int = 0

    def __post_init__(self) -> None:
        if self.kind not in ("sigma_k", "cover", "escape"):
            raise ValueError(f"unknown band-set kind {self.kind!r}")
        for prev, cur in zip(self.bands, self.bands[1:]):
            if cur.lo <= prev.hi:
                raise ValueError(
                    f"bands must be disjoint and sorted, got ...{prev.hi}] then [{cur.lo}..."
                )

    def contains(self, x: float) -> bool:
        return any(iv.contains(x) for iv in self.bands)

    def edges(self) -> list[float]:
        out = []
        for iv in self.bands:
            out.extend((iv.lo, iv.hi))
        return out


def lebesgue_measure(bs: BandSet) -> float:
    """Total length of the bands."""
    return float(sum(iv.length for iv in bs.bands))


def _merge_intervals(intervals, gap: float) -> tuple[Interval, ...]:
    ivs = sorted(intervals, key=lambda iv: iv.lo)
    out: list[Interval] = []
    for iv in ivs:
        if out and iv.lo - out[-1].hi <= gap:
            if iv.hi > out[-1].hi:
                out[-1] = Interval(out[-1].lo, iv.hi)
        else:
            out.append(iv)
    return tuple(out)


def _batch_bisect(fn, lo: np.ndarray, hi: np.ndarray, tol: float) -> np.ndarray:
    """Roots of fn (vectorized, one sign change per bracket) to width <= tol."""
    lo = lo.astype(float).copy()
    hi = hi.astype(float).copy()
    flo = fn(lo)
    width = float((hi - lo).max()) if lo.size else 0.0
    n_iter = max(1, int(math.ceil(math.log2(max(width / tol, 2.0)))) + 1)
    for _ in range(n_iter):
        mid = 0.5 * (lo + hi)
        fm = fn(mid)
        same = np.sign(fm) == np.sign(flo)
        lo = np.where(same, mid, lo)
        flo = np.where(same, fm, flo)
        hi = np.where(same, hi, mid)
    return 0.5 * (lo + hi)


def _golden_max_abs(p: HoppingPair, level: int, lo: np.ndarray, hi: np.ndarray, width: float):
    """Peak position and value of |x_level| on unimodal brackets."""
    a = lo.astype(float).copy()
    b = hi.astype(float).copy()
    span = float((b - a).max()) if a.size else 0.0
    if span <= width:
        n_iter = 1
    else:
        n_iter = int(math.ceil(math.log(width / span) / math.log(_INVPHI)))
    for _ in range(n_iter):
        c = b - _INVPHI * (b - a)
        d = a + _INVPHI * (b - a)
        fc = np.abs(trace_value(p, c, level))
        fd = np.abs(trace_value(p, d, level))
        keep = fc >= fd
        b = np.where(keep, d, b)
        a = np.where(keep, a, c)
    mid = 0.5 * (a + b)
    return mid, np.abs(trace_value(p, mid, level))


def _locate_zeros(p: HoppingPair, level: int, containers, tol: float):
    """All F_level zeros of x_level inside the containers, with container ids.

    Signs are sampled on per-container grids (about 8 F_level points in
    total, distributed by length) and the grids double until the bracketed
    count reaches F_level exactly; it can never exceed it, so equality
    certifies completeness.
    """
    target = fibonacci(level)
    lens = np.array([c.length for c in containers])
    total = float(lens.sum())
    base = np.maximum(9, np.ceil(8.0 * target * lens / max(total, 1e-300)).astype(int) + 1)
    mult = 1
    while True:
        counts = base * mult
        n_pts = int(counts.sum())
        if n_pts > GRID_CAP:
            raise RootIsolationError(level, -1, target, n_pts, "grid cap reached")
        grids = [np.linspace(c.lo, c.hi, int(n)) for c, n in zip(containers, counts)]
        E = np.concatenate(grids)
        x = trace_value(p, E, level)
        s = np.where(x >= 0.0, 1, -1)
        lo_parts, hi_parts, cid_parts = [], [], []
        off = 0
        for ci, g in enumerate(grids):
            ss = s[off : off + len(g)]
            flips = np.nonzero(ss[:-1] != ss[1:])[0]
            lo_parts.append(g[flips])
            hi_parts.append(g[flips + 1])
            cid_parts.append(np.full(flips.shape, ci, dtype=int))
            off += len(g)
        lo = np.concatenate(lo_parts)
        hi = np.concatenate(hi_parts)
        cid = np.concatenate(cid_parts)
        if len(lo) == target:
            break
        if len(lo) > target:
            raise RootIsolationError(
                level, len(lo), target, n_pts, "more sign changes than zeros exist"
            )
        mult *= 2
    zeros = _batch_bisect(lambda EE: trace_value(p, EE, level), lo, hi, tol)
    order = np.argsort(zeros)
    return zeros[order], cid[order]


def _solve_level(p: HoppingPair, level: int, containers, tol: float):
    """Bands of sigma_level inside the containers, plus the merge count."""
    zeros, cid = _locate_zeros(p, level, containers, tol)
    slack = max(tol, 1e3 * np.finfo(float).eps * fibonacci(level))

    def g(EE):
        return np.abs(trace_value(p, EE, level)) - 1.0

    same = cid[1:] == cid[:-1]
    idx_same = np.nonzero(same)[0]
    if idx_same.size:
        peak_pos, peak_val = _golden_max_abs(
            p, level, zeros[idx_same], zeros[idx_same + 1], width=max(10.0 * tol, 1e-11)
        )
    peaks = dict(zip(idx_same.tolist(), zip(peak_pos, peak_val))) if idx_same.size else {}

    brackets: list[tuple[float, float]] = [(containers[cid[0]].lo, float(zeros[0]))]
    breaks: list[int | None] = []
    closed_gaps = 0
    for i in range(len(zeros) - 1):
        if same[i]:
            c_pos, c_val = peaks[i]
            if c_val <= 1.0 + slack:
                breaks.append(None)
                closed_gaps += 1
                continue
            brackets.append((float(zeros[i]), float(c_pos)))
            brackets.append((float(c_pos), float(zeros[i + 1])))
        else:
            brackets.append((float(zeros[i]), containers[cid[i]].hi))
            brackets.append((containers[cid[i + 1]].lo, float(zeros[i + 1])))
        breaks.append(len(brackets) - 2)
    brackets.append((float(zeros[-1]), containers[cid[-1]].hi))

    blo = np.array([b[0] for b in brackets])
    bhi = np.array([b[1] for b in brackets])
    if np.any(np.sign(g(blo)) == np.sign(g(bhi))):
        bad = int(np.nonzero(np.sign(g(blo)) == np.sign(g(bhi)))[0][0])
        raise RootIsolationError(
            level, len(zeros), fibonacci(level), len(blo),
            f"edge bracket ({blo[bad]}, {bhi[bad]}) has no sign change of |x|-1",
        )
    edges = _batch_bisect(g, blo, bhi, tol)

    bands: list[Interval] = []
    start = float(edges[0])
    for br in breaks:
        if br is None:
            continue
        bands.append(Interval(start, float(edges[br])))
        start = float(edges[br + 1])
    bands.append(Interval(start, float(edges[-1])))

    merged: list[Interval] = []
    n_merged = closed_gaps
    for iv in bands:
        if merged and iv.lo - merged[-1].hi <= MERGE_FACTOR * tol:
            merged[-1] = Interval(merged[-1].lo, iv.hi)
            n_merged += 1
        else:
            merged.append(iv)
    return tuple(merged), n_merged


@lru_cache(maxsize=128)
def _chain(p: HoppingPair, k_max: int, tol: float) -> tuple[BandSet, ...]:
    win = energy_window(p)
    whole = [Interval(win.lo, win.hi)]
    if k_max == 1:
        bands, merged = _solve_level(p, 1, whole, tol)
        return (BandSet(bands, "sigma_k", 1, p, tol, merged),)
    prev = _chain(p, k_max - 1, tol)
    if k_max == 2:
        containers = whole
    else:
        inflate = MERGE_FACTOR * tol
        raw = [
            Interval(iv.lo - inflate, iv.hi + inflate)
            for iv in prev[-1].bands + prev[-2].bands
        ]
        containers = list(_merge_intervals(raw, gap=0.0))
    bands, merged = _solve_level(p, k_max, containers, tol)
    return prev + (BandSet(bands, "sigma_k", k_max, p, tol, merged),)


def sigma_chain(p: HoppingPair, k_max: int, tol: float = DEFAULT_TOL) -> list[BandSet]:
    """sigma_1 .. sigma_k_max, computed bottom-up (and cached per (p, tol))."""
    if k_max < 1:
        raise ValueError(f"k must be >= 1, got {k_max}")
    if tol < MIN_TOL:
        raise ValueError(f"tol must be >= {MIN_TOL}, got {tol}")
    return list(_chain(p, k_max, float(tol)))


def sigma_k(p: HoppingPair, k: int, tol: float = DEFAULT_TOL) -> BandSet:
    """The set {E : |x_k(E)| <= 1} as disjoint closed bands."""
    return sigma_chain(p, k, tol)[-1]


def cover(p: HoppingPair, k: int, tol: float = DEFAULT_TOL) -> BandSet:
    """sigma_k union sigma_{k+1}, the level-k outer cover of the spectrum."""
    chain = sigma_chain(p, k + 1, tol)
    merged = _merge_intervals(
        chain[k - 1].bands + chain[k].bands, gap=MERGE_FACTOR * float(tol)
    )
    return BandSet(merged, "cover", k, p, float(tol))


def escape_spectrum(
    p: HoppingPair, K_max: int, grid_step: float, window: EnergyWindow | None = None
) -> BandSet:
    """Union of grid cells not classified as escaped by level K_max.

    A cell is retained when any of its endpoints or midpoint stays Bounded,
    making the result an outer approximation at the grid resolution.
    """
    if window is None:
        window = energy_window(p)
    else:
        m = p.norm_bound
        if window.lo > -m or window.hi < m:
            raise ValueError(
                f"window [{window.lo}, {window.hi}] must contain [-{m}, {m}]"
            )
    if grid_step > 1e-3 * window.width:
        raise ValueError(
            f"grid_step {grid_step} too coarse for window width {window.width}"
        )
    n_cells = int(math.ceil(window.width / grid_step))
    edges = np.linspace(window.lo, window.hi, n_cells + 1)
    mids = 0.5 * (edges[:-1] + edges[1:])
    esc_edges, _, _ = escape_grid(p, edges, K_max)
    esc_mids, _, _ = escape_grid(p, mids, K_max)
    bounded_edges = ~esc_edges
    keep = bounded_edges[:-1] | bounded_edges[1:] | ~esc_mids
    bands: list[Interval] = []
    i = 0
    while i < n_cells:
        if keep[i]:
            j = i
            while j + 1 < n_cells and keep[j + 1]:
                j += 1
            bands.append(Interval(float(edges[i]), float(edges[j + 1])))
            i = j + 1
        i += 1
    return BandSet(tuple(bands), "escape", K_max, p, float(grid_step))


def _distance_to_bands(xs: np.ndarray, bands: tuple[Interval, ...]) -> np.ndarray:
    lo = np.array([iv.lo for iv in bands])
    hi = np.array([iv.hi for iv in bands])
    idx = np.searchsorted(lo, xs, side="right") - 1
    left = np.clip(idx, 0, len(lo) - 1)
    inside = (idx >= 0) & (xs <= hi[left])
    d_left = np.where(idx >= 0, xs - hi[left], np.inf)
    right = np.clip(idx + 1, 0, len(lo) - 1)
    d_right = np.where(idx + 1 < len(lo), lo[right] - xs, np.inf)
    d = np.minimum(np.abs(d_left), np.abs(d_right))
    return np.where(inside, 0.0, d)


def hausdorff_distance(bs1: BandSet, bs2: BandSet) -> float:
    """Hausdorff distance between two nonempty closed band unions."""
    if not bs1.bands or not bs2.bands:
        raise ValueError("hausdorff_distance needs nonempty band sets")

    def directed(a: BandSet, b: BandSet) -> float:
        pts = [iv.lo for iv in a.bands] + [iv.hi for iv in a.bands]
        # Interior maxima of the distance occur at midpoints of b's gaps.
        for prev, cur in zip(b.bands, b.bands[1:]):
            m = 0.5 * (prev.hi + cur.lo)
            if a.contains(m):
                pts.append(m)
        return float(_distance_to_bands(np.array(pts), b.bands).max())

    return max(directed(bs1, bs2), directed(bs2, bs1))


def bandset_to_json(bs: BandSet) -> str:
    """Serialize to the documented JSON shape (shortest round-trip decimals)."""
    obj = {
        "a": bs.params.a,
        "b": bs.params.b,
        "kind": bs.kind,
        "k": bs.level,
        "bands": [[iv.lo, iv.hi] for iv in bs.bands],
        "tol": bs.tol,
    }
    return json.dumps(obj)


def bandset_from_json(text: str) -> BandSet:
    d = json.loads(text)
    return BandSet(
        tuple(Interval(float(lo), float(hi)) for lo, hi in d["bands"]),
        d["kind"],
        int(d["k"]),
        HoppingPair(d["a"], d["b"]),
        float(d["tol"]),
    )
