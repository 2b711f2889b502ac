"""Ad-first exploration planning over recorded UI states.

The planner walks the UI-state graph breadth-first from the entry state.
At equal depth, main and exit pages come first. Inside a state, clickable
leaves are ordered by an ad-likelihood score.
"""

from __future__ import annotations

import json
import os
from collections import deque
from dataclasses import dataclass, field

from .errors import ContractError, InputError
from .traffic import ViewNode, ViewTree, load_view_tree, view_tree_from_dict, view_tree_to_dict

AD_VIEW_CLASSES = ("WebView", "ImageView", "ViewFlipper")
DEFAULT_SCREEN = (1080, 1920)


@dataclass(frozen=True)
class BannerHeuristics:
    min_width_frac: float = 0.8
    max_height_frac: float = 0.15
    edge_frac: float = 0.1
    fullscreen_area_frac: float = 0.9
    banner_bonus: float = 0.5
    fullscreen_bonus: float = 0.25


@dataclass(frozen=True)
class Step:
    state_id: str
    node_id: str
    score: float


@dataclass
class ExplorationPlan:
    steps: list = field(default_factory=list)

    def to_dict(self):
        return {"steps": [{"state": s.state_id, "node": s.node_id, "score": s.score} for s in self.steps]}

    def dumps(self):
        return json.dumps(self.to_dict(), indent=2, sort_keys=True, ensure_ascii=False)

    def __len__(self):
        return len(self.steps)


@dataclass
class UiStateGraph:
    states: dict
    transitions: list = field(default_factory=list)
    entry: str | None = None

    def __post_init__(self):
        if isinstance(self.states, list):
            self.states = dict(self.states)
        if self.entry is None and self.states:
            self.entry = next(iter(self.states))
        for src, node_id, dst in self.transitions:
            if src not in self.states or dst not in self.states:
                raise InputError(f"transition {src}->{dst} references an unknown state")
            try:
                self.states[src].node(node_id)
            except KeyError:
                raise InputError(f"transition from {src} clicks unknown node {node_id!r}") from None

    def successors(self, state_id):
        return [dst for src, _, dst in self.transitions if src == state_id]


def class_weight(class_name):
    terminal = class_name.rsplit(".", 1)[-1]
    return 1.0 if any(c in terminal for c in AD_VIEW_CLASSES) else 0.0


def score_view(node: ViewNode, screen=DEFAULT_SCREEN, heuristics=BannerHeuristics()) -> float:
    """Ad-likelihood score of a leaf view: class weight plus geometry bonus."""
    if not node.is_leaf:
        raise ContractError(f"score_view needs a leaf, {node.id!r} has children")
    sw, sh = screen
    x, y, w, h = node.bounds
    score = class_weight(node.class_name)
    near_top = y <= heuristics.edge_frac * sh
    near_bottom = y + h >= (1 - heuristics.edge_frac) * sh
    if w >= heuristics.min_width_frac * sw and h <= heuristics.max_height_frac * sh and (near_top or near_bottom):
        score += heuristics.banner_bonus
    if w * h >= heuristics.fullscreen_area_frac * sw * sh:
        score += heuristics.fullscreen_bonus
    return score


def _state_order(graph: UiStateGraph, max_depth):
    """BFS levels; main/exit states lead each level, otherwise discovery order."""
    depth = {graph.entry: 0}
    levels = [[graph.entry]]
    frontier = deque([graph.entry])
    while frontier:
        sid = frontier.popleft()
        d = depth[sid]
        if max_depth is not None and d >= max_depth:
            continue
        for nxt in graph.successors(sid):
            if nxt not in depth:
                depth[nxt] = d + 1
                if len(levels) <= d + 1:
                    levels.append([])
                levels[d + 1].append(nxt)
                frontier.append(nxt)
    order = []
    for level in levels:
        priority = [s for s in level if graph.states[s].page_role in ("main", "exit")]
        order.extend(priority + [s for s in level if s not in priority])
    return order


def plan_exploration(
    graph: UiStateGraph,
    screen=DEFAULT_SCREEN,
    max_depth=5,
    max_steps_per_state=30,
    heuristics=BannerHeuristics(),
) -> ExplorationPlan:
    """Ordered click targets favouring likely ad views.

    ``max_depth`` and ``max_steps_per_state`` bound the plan; pass None to
    disable either cap.
    """
    if not graph.states or graph.entry not in graph.states:
        raise InputError(f"entry state {graph.entry!r} not in graph")
    if screen[0] <= 0 or screen[1] <= 0:
        raise InputError("screen dimensions must be positive")
    plan = ExplorationPlan()
    emitted = set()
    for sid in _state_order(graph, max_depth):
        leaves = [n for n in graph.states[sid].leaves() if n.clickable]
        scored = [(score_view(n, screen, heuristics), i, n) for i, n in enumerate(leaves)]
        scored.sort(key=lambda t: (-t[0], t[1]))
        if max_steps_per_state is not None:
            scored = scored[:max_steps_per_state]
        for score, _, node in scored:
            if (sid, node.id) in emitted:
                continue
            emitted.add((sid, node.id))
            plan.steps.append(Step(sid, node.id, score))
    return plan


def graph_from_dict(doc, base_dir=None) -> UiStateGraph:
    """Build a UI-state graph from ``{entry, states:[{id, tree|tree_path}], transitions}``."""
    states = {}
    for entry in doc.get("states", []):
        sid = str(entry["id"])
        if "tree" in entry:
            states[sid] = view_tree_from_dict(entry["tree"])
        else:
            path = entry["tree_path"]
            if base_dir and not os.path.isabs(path):
                path = os.path.join(base_dir, path)
            states[sid] = load_view_tree(path)
    transitions = [(str(t["from"]), str(t["node"]), str(t["to"])) for t in doc.get("transitions", [])]
    return UiStateGraph(states=states, transitions=transitions, entry=doc.get("entry"))


def graph_to_dict(graph: UiStateGraph) -> dict:
    return {
        "entry": graph.entry,
        "states": [{"id": sid, "tree": view_tree_to_dict(t)} for sid, t in graph.states.items()],
        "transitions": [{"from": s, "node": n, "to": d} for s, n, d in graph.transitions],
    }


def plan_trees(trees, screen=DEFAULT_SCREEN, **kwargs) -> ExplorationPlan:
    """Plan over independent view trees, main/exit pages first."""
    plans = []
    ordered = sorted(enumerate(trees), key=lambda t: (t[1].page_role not in ("main", "exit"), t[0]))
    for i, tree in ordered:
        graph = UiStateGraph(states={f"s{i}": tree})
        plans.extend(plan_exploration(graph, screen, **kwargs).steps)
    return ExplorationPlan(plans)


__all__ = [
    "BannerHeuristics",
    "ExplorationPlan",
    "Step",
    "UiStateGraph",
    "ViewTree",
    "class_weight",
    "graph_from_dict",
    "graph_to_dict",
    "plan_exploration",
    "plan_trees",
    "score_view",
]
