"""Structural diff between two parsed models of the same language.

Elements are keyed (classes and nodes by name, members by owning class plus
name, relationships by ends plus kind, edges by endpoint pair) and compared
as sets or multisets. Applying the diff's added/removed counts to the old
metrics reproduces the new metrics' counts; a change inside a surviving
element is reported as modified and leaves counts untouched.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from typing import Union

from .dot import DotGraph, NodeStmt
from .errors import LanguageMismatch
from .metrics import DotMetrics, UmlMetrics
from .plantuml import Attribute, ClassDecl, Relationship, UmlModel


@dataclass
class CategoryDiff:
    added: list = field(default_factory=list)
    removed: list = field(default_factory=list)
    modified: list = field(default_factory=list)

    def is_empty(self) -> bool:
        return not (self.added or self.removed or self.modified)

    def to_dict(self) -> dict:
        return {"added": list(self.added), "removed": list(self.removed),
                "modified": list(self.modified)}


@dataclass
class ModelDiff:
    language: str
    classes: CategoryDiff = field(default_factory=CategoryDiff)
    enums: CategoryDiff = field(default_factory=CategoryDiff)
    attributes: CategoryDiff = field(default_factory=CategoryDiff)  # (class, name)
    operations: CategoryDiff = field(default_factory=CategoryDiff)  # (class, name)
    relationships: CategoryDiff = field(default_factory=CategoryDiff)  # (left, kind, right)
    nodes: CategoryDiff = field(default_factory=CategoryDiff)
    edges: CategoryDiff = field(default_factory=CategoryDiff)  # (src, dst)

    def is_empty(self) -> bool:
        return all(c.is_empty() for c in self._categories().values())

    def _categories(self) -> dict[str, CategoryDiff]:
        return {
            "classes": self.classes, "enums": self.enums,
            "attributes": self.attributes, "operations": self.operations,
            "relationships": self.relationships,
            "nodes": self.nodes, "edges": self.edges,
        }

    def to_dict(self) -> dict:
        return {
            "language": self.language,
            **{name: cat.to_dict() for name, cat in self._categories().items()},
        }


def _counter_diff(old: Counter, new: Counter, category: CategoryDiff) -> None:
    for key in (new - old):
        category.added.extend([key] * (new - old)[key])
    for key in (old - new):
        category.removed.extend([key] * (old - new)[key])


def _member_key(member) -> tuple:
    if isinstance(member, Attribute):
        return ("attribute", member.name)
    return ("operation", member.name)


def _diff_members(class_name: str, old: ClassDecl, new: ClassDecl, diff: ModelDiff) -> bool:
    old_members = {_member_key(m): m for m in old.members}
    new_members = {_member_key(m): m for m in new.members}
    changed = False
    for key in new_members.keys() - old_members.keys():
        target = diff.attributes if key[0] == "attribute" else diff.operations
        target.added.append((class_name, key[1]))
        changed = True
    for key in old_members.keys() - new_members.keys():
        target = diff.attributes if key[0] == "attribute" else diff.operations
        target.removed.append((class_name, key[1]))
        changed = True
    for key in old_members.keys() & new_members.keys():
        if old_members[key] != new_members[key]:
            target = diff.attributes if key[0] == "attribute" else diff.operations
            target.modified.append((class_name, key[1]))
            changed = True
    return changed


def _diff_uml(old: UmlModel, new: UmlModel) -> ModelDiff:
    diff = ModelDiff(language="plantuml")

    old_classes = {c.name: c for c in old.classes()}
    new_classes = {c.name: c for c in new.classes()}
    for name in sorted(new_classes.keys() - old_classes.keys()):
        diff.classes.added.append(name)
        for member in new_classes[name].members:
            kind, member_name = _member_key(member)
            target = diff.attributes if kind == "attribute" else diff.operations
            target.added.append((name, member_name))
    for name in sorted(old_classes.keys() - new_classes.keys()):
        diff.classes.removed.append(name)
        for member in old_classes[name].members:
            kind, member_name = _member_key(member)
            target = diff.attributes if kind == "attribute" else diff.operations
            target.removed.append((name, member_name))
    for name in sorted(old_classes.keys() & new_classes.keys()):
        changed = _diff_members(name, old_classes[name], new_classes[name], diff)
        if old_classes[name].abstract != new_classes[name].abstract or changed:
            diff.classes.modified.append(name)

    old_enums = {e.name: e for e in old.enums()}
    new_enums = {e.name: e for e in new.enums()}
    for name in sorted(new_enums.keys() - old_enums.keys()):
        diff.enums.added.append(name)
    for name in sorted(old_enums.keys() - new_enums.keys()):
        diff.enums.removed.append(name)
    for name in sorted(old_enums.keys() & new_enums.keys()):
        if old_enums[name] != new_enums[name]:
            diff.enums.modified.append(name)

    def rel_key(r: Relationship) -> tuple:
        return (r.left, r.kind.value, r.right)

    old_rels = Counter(rel_key(r) for r in old.relationships())
    new_rels = Counter(rel_key(r) for r in new.relationships())
    _counter_diff(old_rels, new_rels, diff.relationships)

    def payloads(model: UmlModel, key: tuple) -> list:
        return sorted(
            ((r.left_mult, r.right_mult, r.label)
             for r in model.relationships() if rel_key(r) == key),
            key=lambda t: tuple("" if v is None else v for v in t),
        )

    for key in old_rels & new_rels:
        old_payload, new_payload = payloads(old, key), payloads(new, key)
        common = min(len(old_payload), len(new_payload))
        if old_payload[:common] != new_payload[:common]:
            diff.relationships.modified.append(key)
    return diff


def _node_attrs(graph: DotGraph) -> dict[str, dict[str, str]]:
    merged: dict[str, dict[str, str]] = {name: {} for name in graph.node_ids()}
    for stmt in graph.statements:
        if isinstance(stmt, NodeStmt):
            merged[stmt.node_id.value].update(stmt.attrs)
    return merged


def _edge_counter(graph: DotGraph) -> Counter:
    counter: Counter = Counter()
    for src, dst, _ in graph.edges():
        key = (src, dst) if graph.directed else tuple(sorted((src, dst)))
        counter[key] += 1
    return counter


def _diff_dot(old: DotGraph, new: DotGraph) -> ModelDiff:
    diff = ModelDiff(language="graphviz")
    old_nodes = _node_attrs(old)
    new_nodes = _node_attrs(new)
    diff.nodes.added.extend(sorted(new_nodes.keys() - old_nodes.keys()))
    diff.nodes.removed.extend(sorted(old_nodes.keys() - new_nodes.keys()))
    for name in sorted(old_nodes.keys() & new_nodes.keys()):
        if old_nodes[name] != new_nodes[name]:
            diff.nodes.modified.append(name)

    old_edges = _edge_counter(old)
    new_edges = _edge_counter(new)
    _counter_diff(old_edges, new_edges, diff.edges)

    def edge_attr_sets(graph: DotGraph) -> dict[tuple, list]:
        out: dict[tuple, list] = {}
        for src, dst, attrs in graph.edges():
            key = (src, dst) if graph.directed else tuple(sorted((src, dst)))
            out.setdefault(key, []).append(sorted(attrs.items()))
        return out

    old_attrs = edge_attr_sets(old)
    new_attrs = edge_attr_sets(new)
    for key in old_edges & new_edges:
        common = min(old_edges[key], new_edges[key])
        if sorted(old_attrs[key])[:common] != sorted(new_attrs[key])[:common]:
            diff.edges.modified.append(key)
    return diff


def diff_models(
    old: Union[UmlModel, DotGraph], new: Union[UmlModel, DotGraph]
) -> ModelDiff:
    """Diff two models of the same language; raises LanguageMismatch otherwise."""
    if isinstance(old, UmlModel) and isinstance(new, UmlModel):
        return _diff_uml(old, new)
    if isinstance(old, DotGraph) and isinstance(new, DotGraph):
        return _diff_dot(old, new)
    raise LanguageMismatch(
        f"cannot diff {type(old).__name__} against {type(new).__name__}"
    )


def apply_to_metrics(diff: ModelDiff, old):
    """Project the old metrics forward through the diff's add/remove counts.

    Used to check the consistency invariant: the result must equal the
    metrics of the new model, count for count.
    """
    if diff.language == "plantuml":
        assert isinstance(old, UmlMetrics)
        histogram = Counter(old.relationship_kind_histogram)
        for (_, kind, _) in diff.relationships.added:
            histogram[kind] += 1
        for (_, kind, _) in diff.relationships.removed:
            histogram[kind] -= 1
        return UmlMetrics(
            class_count=old.class_count + len(diff.classes.added) - len(diff.classes.removed),
            enum_count=old.enum_count + len(diff.enums.added) - len(diff.enums.removed),
            attribute_count=(old.attribute_count
                             + len(diff.attributes.added) - len(diff.attributes.removed)),
            operation_count=(old.operation_count
                             + len(diff.operations.added) - len(diff.operations.removed)),
            relationship_count=(old.relationship_count
                                + len(diff.relationships.added)
                                - len(diff.relationships.removed)),
            relationship_kind_histogram={k: v for k, v in histogram.items() if v},
        )
    assert isinstance(old, DotMetrics)
    return DotMetrics(
        node_count=old.node_count + len(diff.nodes.added) - len(diff.nodes.removed),
        edge_count=old.edge_count + len(diff.edges.added) - len(diff.edges.removed),
        attribute_key_set=old.attribute_key_set,
    )
