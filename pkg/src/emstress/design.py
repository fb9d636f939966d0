"""Seeded random generation of Manhattan interconnect trees with KCL-clean
current assignments.

Topology grows by attaching axis-aligned segments either at an existing node
or at a fresh node created by splitting an existing branch; every candidate
is rejected unless its rectangle stays on canvas and clears all wires except
the junction square around its own attachment node.  All geometry is integer
um, so designs reproduce byte-for-byte from (seed, config).

Currents follow a leaf-injection model: random currents injected at the
blocked terminals (summing to zero) are routed along the unique tree paths,
which satisfies KCL at every junction by construction.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass

from .model import (CANVAS_UM, HORIZONTAL, VERTICAL, KIND_JUNCTION,
                    KIND_TERMINAL, Branch, InterconnectTree, Node,
                    PhysicalParams)

_MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15


def splitmix64(x: int) -> int:
    """One splitmix64 output step; the documented 64-bit mix function."""
    x = (x + _GOLDEN) & _MASK64
    x ^= x >> 30
    x = (x * 0xBF58476D1CE4E5B9) & _MASK64
    x ^= x >> 27
    x = (x * 0x94D049BB133111EB) & _MASK64
    x ^= x >> 31
    return x


def derive_seed(seed: int, index: int) -> int:
    """Per-design seed: splitmix64(seed XOR splitmix64(index))."""
    return splitmix64((seed & _MASK64) ^ splitmix64(index & _MASK64))


class GenerationError(RuntimeError):
    pass


@dataclass(frozen=True)
class GenConfig:
    rng_seed: int = 0
    n_designs: int = 1
    branch_count_range: tuple[int, int] = (5, 79)
    width_range: tuple[int, int] = (1, 4)            # px (= um)
    segment_length_range: tuple[int, int] = (8, 120)  # um
    j_magnitude_range: tuple[float, float] = (1e7, 1e9)  # A/m^2
    canvas: int = CANVAS_UM
    max_attempts: int = 200      # whole-tree rebuild budget
    max_place_tries: int = 60    # per-segment placement budget

    def validate(self) -> None:
        for name in ("branch_count_range", "width_range",
                     "segment_length_range", "j_magnitude_range"):
            lo, hi = getattr(self, name)
            if not lo <= hi or lo <= 0:
                raise ValueError(f"GenConfig.{name} invalid: {(lo, hi)}")
        if self.canvas < 16:
            raise ValueError("canvas too small")


# internal mutable build state -------------------------------------------

class _Builder:
    def __init__(self, cfg: GenConfig, rng: random.Random):
        self.cfg = cfg
        self.rng = rng
        self.nodes: list[tuple[int, int]] = []          # (x, y)
        self.segs: list[dict] = []  # {a, b (node idx), orient, w}
        self.incident: list[list[int]] = []             # node -> seg indices
        self.pixels: dict[tuple[int, int], int] = {}    # pixel -> seg index

    def _add_node(self, x: int, y: int) -> int:
        self.nodes.append((x, y))
        self.incident.append([])
        return len(self.nodes) - 1

    def _seg_pixels(self, a: int, b: int, orient: str, w: int):
        (xa, ya), (xb, yb) = self.nodes[a], self.nodes[b]
        if orient == HORIZONTAL:
            x0, x1 = min(xa, xb), max(xa, xb)
            y0 = ya
            return [(x, y) for x in range(x0, x1) for y in range(y0, y0 + w)]
        y0, y1 = min(ya, yb), max(ya, yb)
        x0 = xa
        return [(x, y) for x in range(x0, x0 + w) for y in range(y0, y1)]

    def _paint(self, si: int) -> None:
        s = self.segs[si]
        for p in self._seg_pixels(s["a"], s["b"], s["orient"], s["w"]):
            self.pixels.setdefault(p, si)

    def _repaint_all(self) -> None:
        self.pixels.clear()
        for si in range(len(self.segs)):
            self._paint(si)

    def _fits(self, a_node: int, x0: int, x1: int, y0: int, y1: int,
              allowed_segs: set[int], w_new: int) -> bool:
        c = self.cfg.canvas
        if x0 < 0 or y0 < 0 or x1 > c or y1 > c:
            return False
        ax, ay = self.nodes[a_node]
        widths = [self.segs[s]["w"] for s in allowed_segs] + [w_new]
        r = max(widths) + 1
        # expanded 1px clearance zone; only attachment-incident wires may be
        # touched, and only inside the junction square around the node
        for x in range(x0 - 1, x1 + 1):
            for y in range(y0 - 1, y1 + 1):
                owner = self.pixels.get((x, y))
                if owner is None:
                    continue
                if owner not in allowed_segs:
                    return False
                if abs(x - ax) > r or abs(y - ay) > r:
                    return False
        return True

    def _candidate_rect(self, x: int, y: int, d: tuple[int, int],
                        L: int, w: int) -> tuple[int, int, int, int]:
        dx, dy = d
        if dx:  # horizontal
            x0 = x if dx > 0 else x - L
            return x0, x0 + L, y, y + w
        y0 = y if dy > 0 else y - L
        return x, x + w, y0, y0 + L

    def _used_dirs(self, node: int) -> set[tuple[int, int]]:
        used = set()
        x, y = self.nodes[node]
        for si in self.incident[node]:
            s = self.segs[si]
            ox, oy = self.nodes[s["b"] if s["a"] == node else s["a"]]
            used.add((int(math.copysign(1, ox - x)) if ox != x else 0,
                      int(math.copysign(1, oy - y)) if oy != y else 0))
        return used

    def _attach_segment(self, node: int, dirs: list[tuple[int, int]],
                        allowed: set[int]) -> bool:
        rng, cfg = self.rng, self.cfg
        lo, hi = cfg.segment_length_range
        x, y = self.nodes[node]
        for _ in range(cfg.max_place_tries):
            d = rng.choice(dirs)
            L = rng.randint(lo, hi)
            w = rng.randint(*cfg.width_range)
            rect = self._candidate_rect(x, y, d, L, w)
            if not self._fits(node, *rect, allowed_segs=allowed, w_new=w):
                continue
            nx, ny = x + d[0] * L, y + d[1] * L
            other = self._add_node(nx, ny)
            a, b = (node, other) if (d[0] + d[1]) > 0 else (other, node)
            orient = HORIZONTAL if d[0] else VERTICAL
            si = len(self.segs)
            self.segs.append({"a": a, "b": b, "orient": orient, "w": w})
            self.incident[node].append(si)
            self.incident[other].append(si)
            self._paint(si)
            return True
        return False

    def grow(self, target: int) -> bool:
        rng, cfg = self.rng, self.cfg
        # seed segment roughly centered
        lo, hi = cfg.segment_length_range
        L = rng.randint(lo, hi)
        w = rng.randint(*cfg.width_range)
        orient = rng.choice((HORIZONTAL, VERTICAL))
        if orient == HORIZONTAL:
            x0 = rng.randint(1, cfg.canvas - L - 1)
            y0 = rng.randint(1, cfg.canvas - w - 1)
            a = self._add_node(x0, y0)
            b = self._add_node(x0 + L, y0)
        else:
            x0 = rng.randint(1, cfg.canvas - w - 1)
            y0 = rng.randint(1, cfg.canvas - L - 1)
            a = self._add_node(x0, y0)
            b = self._add_node(x0, y0 + L)
        self.segs.append({"a": a, "b": b, "orient": orient, "w": w})
        self.incident[a].append(0)
        self.incident[b].append(0)
        self._paint(0)

        stall = 0
        while len(self.segs) < target:
            remaining = target - len(self.segs)
            mode = "node" if (remaining == 1 or rng.random() < 0.55) else "split"
            ok = self._grow_at_node() if mode == "node" else self._grow_by_split()
            stall = 0 if ok else stall + 1
            if stall > 4 * cfg.max_place_tries:
                return False
        return True

    def _grow_at_node(self) -> bool:
        node = self.rng.randrange(len(self.nodes))
        free = [d for d in ((1, 0), (-1, 0), (0, 1), (0, -1))
                if d not in self._used_dirs(node)]
        if not free:
            return False
        return self._attach_segment(node, free, allowed=set(self.incident[node]))

    def _grow_by_split(self) -> bool:
        rng = self.rng
        cands = [si for si, s in enumerate(self.segs)
                 if self._seg_len(si) >= 4]
        if not cands:
            return False
        si = rng.choice(cands)
        s = self.segs[si]
        (xa, ya), (xb, yb) = self.nodes[s["a"]], self.nodes[s["b"]]
        L = self._seg_len(si)
        cut = rng.randint(2, L - 2)
        if s["orient"] == HORIZONTAL:
            px, py = min(xa, xb) + cut, ya
            perp = [(0, 1), (0, -1)]
        else:
            px, py = xa, min(ya, yb) + cut
            perp = [(1, 0), (-1, 0)]
        mid = self._add_node(px, py)
        # split host into a-mid and mid-b, keeping width
        far = s["b"]
        s_new = {"a": mid, "b": far, "orient": s["orient"], "w": s["w"]}
        s["b"] = mid
        ni = len(self.segs)
        self.segs.append(s_new)
        self.incident[far].remove(si)
        self.incident[far].append(ni)
        self.incident[mid].extend([si, ni])
        self._repaint_all()
        if self._attach_segment(mid, perp, allowed={si, ni}):
            return True
        # undo split
        self.segs.pop()
        s["b"] = far
        self.incident[far].remove(ni)
        self.incident[far].append(si)
        self.nodes.pop()
        self.incident.pop()
        self._repaint_all()
        return False

    def _seg_len(self, si: int) -> int:
        s = self.segs[si]
        (xa, ya), (xb, yb) = self.nodes[s["a"]], self.nodes[s["b"]]
        return abs(xb - xa) + abs(yb - ya)

    def to_tree(self, design_id: int) -> InterconnectTree:
        deg = [0] * len(self.nodes)
        for s in self.segs:
            deg[s["a"]] += 1
            deg[s["b"]] += 1
        nodes = tuple(
            Node(id=i, x=float(x), y=float(y),
                 kind=KIND_JUNCTION if deg[i] >= 2 else KIND_TERMINAL)
            for i, (x, y) in enumerate(self.nodes))
        branches = []
        for bid, s in enumerate(self.segs):
            a, b = s["a"], s["b"]
            (xa, ya), (xb, yb) = self.nodes[a], self.nodes[b]
            if (xa, ya) > (xb, yb):   # from_node is the lower-coordinate end
                a, b = b, a
            branches.append(Branch(id=bid, from_node=a, to_node=b,
                                   orientation=s["orient"], width=float(s["w"]),
                                   j=0.0))
        return InterconnectTree(nodes=nodes, branches=tuple(branches),
                                design_id=design_id)


def generate_topology(seed: int, cfg: GenConfig, design_id: int = 0) -> InterconnectTree:
    """Random Manhattan tree without currents; deterministic per (seed, cfg)."""
    cfg.validate()
    for attempt in range(cfg.max_attempts):
        rng = random.Random(derive_seed(seed, attempt))
        target = rng.randint(*cfg.branch_count_range)
        builder = _Builder(cfg, rng)
        if builder.grow(target):
            return builder.to_tree(design_id)
    raise GenerationError(f"placement failed after {cfg.max_attempts} attempts "
                          f"(seed={seed})")


def assign_currents(tree: InterconnectTree, seed: int, cfg: GenConfig,
                    params: PhysicalParams) -> InterconnectTree:
    """Leaf-injection currents routed through the tree; KCL-clean by
    construction.  Resamples (then rescales) until all |j| fit the range."""
    cfg.validate()
    rng = random.Random(derive_seed(seed, 0x6A6A6A6A))
    leaves = [n.id for n in tree.nodes if n.kind == KIND_TERMINAL]
    if len(leaves) < 2:
        raise GenerationError("tree needs at least two terminals")
    t_m = params.t_metal
    j_lo, j_hi = cfg.j_magnitude_range
    incident = tree.incident()
    for _ in range(100):
        inject = {}
        for leaf in leaves:
            b = incident[leaf][0]
            jmag = math.exp(rng.uniform(math.log(j_lo), math.log(j_hi)))
            sign = rng.choice((-1.0, 1.0))
            inject[leaf] = sign * jmag * b.width * t_m * 1e-12  # A
        mean = sum(inject.values()) / len(leaves)
        inject = {k: v - mean for k, v in inject.items()}
        branch_j = _route(tree, inject, t_m)
        jmax = max(abs(j) for j in branch_j.values())
        if jmax <= j_hi:
            break
    else:
        scale = 0.99 * j_hi / jmax
        inject = {k: v * scale for k, v in inject.items()}
        branch_j = _route(tree, inject, t_m)
    branches = tuple(Branch(id=b.id, from_node=b.from_node, to_node=b.to_node,
                            orientation=b.orientation, width=b.width,
                            j=branch_j[b.id])
                     for b in tree.branches)
    return InterconnectTree(nodes=tree.nodes, branches=branches,
                            design_id=tree.design_id)


def _route(tree: InterconnectTree, inject: dict[int, float],
           t_m: float) -> dict[int, float]:
    """Branch j from leaf injections: current through a branch equals the
    net injection of the subtree hanging off it, signed along local +x/+y."""
    incident = tree.incident()
    root = tree.nodes[0].id
    order = [root]
    parent: dict[int, tuple[int, Branch] | None] = {root: None}
    for u in order:
        for b in incident[u]:
            v = b.to_node if b.from_node == u else b.from_node
            if v not in parent:
                parent[v] = (u, b)
                order.append(v)
    subtree = {nid: inject.get(nid, 0.0) for nid in parent}
    for v in reversed(order[1:]):
        u, _ = parent[v]
        subtree[u] += subtree[v]
    branch_j: dict[int, float] = {}
    for v in order[1:]:
        u, b = parent[v]
        current_toward_parent = subtree[v]   # A, flowing from v-side to u-side
        # local +x runs from from_node to to_node
        along = current_toward_parent if b.from_node == v else -current_toward_parent
        branch_j[b.id] = along / (b.width * t_m * 1e-12)
    return branch_j


def generate_tree(seed: int, cfg: GenConfig, params: PhysicalParams,
                  design_id: int = 0) -> InterconnectTree:
    """Full design: topology plus currents, deterministic per (seed, cfg)."""
    topo = generate_topology(seed, cfg, design_id)
    return assign_currents(topo, seed, cfg, params)
