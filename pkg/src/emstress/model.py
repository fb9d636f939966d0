"""Domain types for interconnect trees and the Korhonen stress physics.

Geometry lives on a 256x256 um canvas with integer-um snapping (1 pixel =
1 um).  A branch is an axis-aligned rectangle: its centerline runs from the
lower-coordinate node to the higher-coordinate node (local coordinate x
increases along that direction) and its width extends toward +y (horizontal
branches) or +x (vertical branches) from the centerline.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

# Physical constants (SI unless noted)
KB_J = 1.380649e-23        # Boltzmann, J/K
KB_EV = 8.617333262e-5     # Boltzmann, eV/K
E_CHARGE = 1.602176634e-19 # elementary charge, C

CANVAS_UM = 256            # canvas side, um (= pixels)

KIND_JUNCTION = "interior-junction"
KIND_TERMINAL = "blocked-terminal"

HORIZONTAL = "horizontal"
VERTICAL = "vertical"


@dataclass(frozen=True)
class Node:
    id: int
    x: float   # um
    y: float   # um
    kind: str  # KIND_JUNCTION | KIND_TERMINAL


@dataclass(frozen=True)
class Branch:
    """Axis-aligned wire segment.

    from_node is always the lower-coordinate endpoint, so the local
    coordinate runs from from_node to to_node.  Positive current density j
    points toward +x (right) or +y (up); negative means left/down.
    """
    id: int
    from_node: int
    to_node: int
    orientation: str  # HORIZONTAL | VERTICAL
    width: float      # um
    j: float          # A/m^2, signed


@dataclass(frozen=True)
class PhysicalParams:
    """Parameterization of Korhonen's equation.

    Defaults are documented project choices (copper-like at 373 K), not
    values taken from any particular measurement.  Da, when given, bypasses
    the Arrhenius form D0*exp(-Ea/kT).
    """
    D0: float = 7.8e-5       # m^2/s
    Ea: float = 0.86         # eV
    B: float = 1.0e11        # Pa
    Omega: float = 1.18e-29  # m^3
    T: float = 373.0         # K
    Zstar: float = 10.0
    e_charge: float = E_CHARGE  # C
    rho: float = 2.25e-8     # Ohm*m
    sigma_T: float = 0.0     # Pa, initial residual stress
    t_metal: float = 0.2     # um, metal thickness
    Da: Optional[float] = None  # m^2/s, direct override of D0*exp(-Ea/kT)

    def validate(self) -> None:
        for name in ("D0", "B", "Omega", "T", "Zstar", "e_charge", "rho", "t_metal"):
            v = getattr(self, name)
            if not (v > 0 and math.isfinite(v)):
                raise ValueError(f"PhysicalParams.{name} must be positive, got {v}")
        if self.Ea < 0 or not math.isfinite(self.Ea):
            raise ValueError(f"PhysicalParams.Ea must be >= 0, got {self.Ea}")
        if not math.isfinite(self.sigma_T):
            raise ValueError("PhysicalParams.sigma_T must be finite")
        if self.Da is not None and not self.Da > 0:
            raise ValueError("PhysicalParams.Da must be positive when given")


def atomic_diffusivity(params: PhysicalParams) -> float:
    """Effective atomic diffusion coefficient D_a = D0*exp(-Ea/(kB*T)), m^2/s."""
    if params.Da is not None:
        return params.Da
    return params.D0 * math.exp(-params.Ea / (KB_EV * params.T))


def diffusivity(params: PhysicalParams) -> float:
    """Stress diffusivity kappa = D_a*B*Omega/(kB*T), m^2/s."""
    return atomic_diffusivity(params) * params.B * params.Omega / (KB_J * params.T)


def driving_force(branch: Branch, params: PhysicalParams) -> float:
    """EM driving force G = E*q*/Omega with E = rho*j, Pa/m.  Odd in j."""
    qstar = params.Zstar * params.e_charge
    return params.rho * branch.j * qstar / params.Omega


@dataclass(frozen=True)
class InterconnectTree:
    nodes: tuple[Node, ...]
    branches: tuple[Branch, ...]
    design_id: int = 0

    _node_by_id: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "nodes", tuple(self.nodes))
        object.__setattr__(self, "branches", tuple(self.branches))
        object.__setattr__(self, "_node_by_id", {n.id: n for n in self.nodes})

    def node(self, node_id: int) -> Node:
        return self._node_by_id[node_id]

    def branch_length(self, branch: Branch) -> float:
        a = self.node(branch.from_node)
        b = self.node(branch.to_node)
        return abs(b.x - a.x) + abs(b.y - a.y)

    def degrees(self) -> dict[int, int]:
        deg = {n.id: 0 for n in self.nodes}
        for b in self.branches:
            deg[b.from_node] += 1
            deg[b.to_node] += 1
        return deg

    def incident(self) -> dict[int, list[Branch]]:
        inc: dict[int, list[Branch]] = {n.id: [] for n in self.nodes}
        for b in self.branches:
            inc[b.from_node].append(b)
            inc[b.to_node].append(b)
        return inc


def branch_rect(tree: InterconnectTree, branch: Branch) -> tuple[int, int, int, int]:
    """Pixel footprint (x0, x1, y0, y1), half-open, of a branch rectangle.

    A branch of length L covers exactly L pixels along its axis, one per
    1 um mesh cell; the width covers `width` pixel rows/columns starting at
    the centerline.
    """
    a = tree.node(branch.from_node)
    b = tree.node(branch.to_node)
    w = int(round(branch.width))
    if branch.orientation == HORIZONTAL:
        x0, x1 = int(round(a.x)), int(round(b.x))
        y0 = int(round(a.y))
        return x0, x1, y0, y0 + w
    else:
        y0, y1 = int(round(a.y)), int(round(b.y))
        x0 = int(round(a.x))
        return x0, x0 + w, y0, y1


def validate_tree(tree: InterconnectTree, params: PhysicalParams,
                  j_max: float = 1e9, kcl_rtol: float = 1e-6) -> list[str]:
    """Check all tree invariants; returns human-readable violations.

    An empty list means the tree is valid.  Violations are data, not
    exceptions: callers decide how to react.
    """
    out: list[str] = []
    ids = [n.id for n in tree.nodes]
    if len(set(ids)) != len(ids):
        out.append("duplicate node ids")
        return out
    bids = [b.id for b in tree.branches]
    if len(set(bids)) != len(bids):
        out.append("duplicate branch ids")
        return out

    for n in tree.nodes:
        if not (0 <= n.x <= CANVAS_UM and 0 <= n.y <= CANVAS_UM):
            out.append(f"node {n.id}: position ({n.x},{n.y}) outside [0,{CANVAS_UM}] um")
        if n.kind not in (KIND_JUNCTION, KIND_TERMINAL):
            out.append(f"node {n.id}: unknown kind {n.kind!r}")

    deg = tree.degrees()
    for n in tree.nodes:
        d = deg[n.id]
        if n.kind == KIND_TERMINAL and d != 1:
            out.append(f"node {n.id}: blocked-terminal has degree {d}, expected 1")
        if n.kind == KIND_JUNCTION and d < 2:
            out.append(f"node {n.id}: interior-junction has degree {d}, expected >= 2")

    for b in tree.branches:
        if b.from_node == b.to_node:
            out.append(f"branch {b.id}: from == to")
            continue
        if b.from_node not in tree._node_by_id or b.to_node not in tree._node_by_id:
            out.append(f"branch {b.id}: dangling node reference")
            continue
        a, c = tree.node(b.from_node), tree.node(b.to_node)
        if b.orientation == HORIZONTAL:
            if a.y != c.y:
                out.append(f"branch {b.id}: horizontal but endpoint y differ")
            if not a.x < c.x:
                out.append(f"branch {b.id}: from_node must be the lower-x endpoint")
        elif b.orientation == VERTICAL:
            if a.x != c.x:
                out.append(f"branch {b.id}: vertical but endpoint x differ")
            if not a.y < c.y:
                out.append(f"branch {b.id}: from_node must be the lower-y endpoint")
        else:
            out.append(f"branch {b.id}: unknown orientation {b.orientation!r}")
            continue
        if tree.branch_length(b) <= 0:
            out.append(f"branch {b.id}: non-positive length")
        if b.width < 1:
            out.append(f"branch {b.id}: width {b.width} < 1 um")
        if abs(b.j) > j_max * (1 + 1e-12):
            out.append(f"branch {b.id}: |j|={abs(b.j):.3e} exceeds j_max={j_max:.3e}")
        x0, x1, y0, y1 = branch_rect(tree, b)
        if x0 < 0 or y0 < 0 or x1 > CANVAS_UM or y1 > CANVAS_UM:
            out.append(f"branch {b.id}: footprint exceeds canvas")

    # connectivity + acyclicity: a tree has #edges == #nodes - 1 and is connected
    if len(tree.branches) != len(tree.nodes) - 1:
        out.append(f"graph is not a tree: {len(tree.branches)} branches, "
                   f"{len(tree.nodes)} nodes (cycle or disconnect)")
    adj: dict[int, list[int]] = {n.id: [] for n in tree.nodes}
    for b in tree.branches:
        if b.from_node in adj and b.to_node in adj and b.from_node != b.to_node:
            adj[b.from_node].append(b.to_node)
            adj[b.to_node].append(b.from_node)
    if tree.nodes:
        seen = {tree.nodes[0].id}
        stack = [tree.nodes[0].id]
        while stack:
            u = stack.pop()
            for v in adj[u]:
                if v not in seen:
                    seen.add(v)
                    stack.append(v)
        if len(seen) != len(tree.nodes):
            out.append("graph is disconnected")

    # KCL at interior junctions: sum of w*t*j*n_r = 0, n_r = +1 when the
    # branch extends away from the node in +x/+y local direction.
    inc = tree.incident()
    for n in tree.nodes:
        if n.kind != KIND_JUNCTION:
            continue
        total = 0.0
        scale = 0.0
        for b in inc[n.id]:
            flow = b.width * params.t_metal * b.j  # um^2 * A/m^2, common factor
            sign = 1.0 if b.from_node == n.id else -1.0
            total += sign * flow
            scale = max(scale, abs(flow))
        if scale > 0 and abs(total) / scale >= kcl_rtol:
            out.append(f"node {n.id}: KCL violated, residual {total:.6e} "
                       f"(relative {abs(total) / scale:.3e})")

    # branch rectangles may only overlap inside shared junction squares
    rects = {b.id: branch_rect(tree, b) for b in tree.branches}
    for i, b1 in enumerate(tree.branches):
        x0a, x1a, y0a, y1a = rects[b1.id]
        for b2 in tree.branches[i + 1:]:
            x0b, x1b, y0b, y1b = rects[b2.id]
            ox0, ox1 = max(x0a, x0b), min(x1a, x1b)
            oy0, oy1 = max(y0a, y0b), min(y1a, y1b)
            if ox0 >= ox1 or oy0 >= oy1:
                continue
            shared = ({b1.from_node, b1.to_node} & {b2.from_node, b2.to_node})
            if not shared:
                out.append(f"branches {b1.id},{b2.id}: overlap without shared node")
                continue
            r = max(b1.width, b2.width)
            ok = False
            for nid in shared:
                n = tree.node(nid)
                if (ox0 >= n.x - r and ox1 <= n.x + r and
                        oy0 >= n.y - r and oy1 <= n.y + r):
                    ok = True
            if not ok:
                out.append(f"branches {b1.id},{b2.id}: overlap outside junction square")

    return out


# --- EMTREE v1 line-oriented serialization -------------------------------

EMTREE_HEADER = "EMTREE v1"


def tree_to_text(tree: InterconnectTree) -> str:
    lines = [EMTREE_HEADER, f"DESIGN {tree.design_id}"]
    for n in tree.nodes:
        lines.append(f"NODE {n.id} {_fmt(n.x)} {_fmt(n.y)} {n.kind}")
    for b in tree.branches:
        lines.append(f"BRANCH {b.id} {b.from_node} {b.to_node} {_fmt(b.width)} {b.j!r}")
    return "\n".join(lines) + "\n"


def tree_from_text(text: str) -> InterconnectTree:
    lines = [ln.strip() for ln in text.splitlines() if ln.strip()]
    if not lines or not lines[0].startswith("EMTREE"):
        raise ValueError("not an EMTREE file")
    if lines[0] != EMTREE_HEADER:
        raise ValueError(f"unsupported EMTREE version: {lines[0]!r}")
    design_id = 0
    nodes: list[Node] = []
    raw_branches: list[tuple[int, int, int, float, float]] = []
    for ln in lines[1:]:
        parts = ln.split()
        if parts[0] == "DESIGN":
            design_id = int(parts[1])
        elif parts[0] == "NODE":
            nodes.append(Node(id=int(parts[1]), x=float(parts[2]),
                              y=float(parts[3]), kind=parts[4]))
        elif parts[0] == "BRANCH":
            raw_branches.append((int(parts[1]), int(parts[2]), int(parts[3]),
                                 float(parts[4]), float(parts[5])))
        else:
            raise ValueError(f"unknown EMTREE record: {parts[0]!r}")
    by_id = {n.id: n for n in nodes}
    branches = []
    for bid, fr, to, w, j in raw_branches:
        a, c = by_id[fr], by_id[to]
        orientation = HORIZONTAL if a.y == c.y else VERTICAL
        branches.append(Branch(id=bid, from_node=fr, to_node=to,
                               orientation=orientation, width=w, j=j))
    return InterconnectTree(nodes=tuple(nodes), branches=tuple(branches),
                            design_id=design_id)


def save_tree(tree: InterconnectTree, path) -> None:
    with open(path, "w") as f:
        f.write(tree_to_text(tree))


def load_tree(path) -> InterconnectTree:
    with open(path) as f:
        return tree_from_text(f.read())


def _fmt(v: float) -> str:
    # integers print without a trailing .0 so files stay byte-stable
    if float(v).is_integer():
        return str(int(v))
    return repr(float(v))
