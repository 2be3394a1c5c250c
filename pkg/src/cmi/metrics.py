"""Counting metrics over parsed models.

These operationalize qualitative comparisons between generated models
(e.g. "classes but no relationships") as checkable numbers.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from typing import Union

from .dot import DotGraph
from .plantuml import Attribute, ClassDecl, EnumDecl, Operation, UmlModel


@dataclass
class UmlMetrics:
    class_count: int = 0
    enum_count: int = 0
    attribute_count: int = 0
    operation_count: int = 0
    relationship_count: int = 0
    relationship_kind_histogram: dict[str, int] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "language": "plantuml",
            "class_count": self.class_count,
            "enum_count": self.enum_count,
            "attribute_count": self.attribute_count,
            "operation_count": self.operation_count,
            "relationship_count": self.relationship_count,
            "relationship_kind_histogram": dict(self.relationship_kind_histogram),
        }


@dataclass
class DotMetrics:
    node_count: int = 0
    edge_count: int = 0
    attribute_key_set: set[str] = field(default_factory=set)

    def to_dict(self) -> dict:
        return {
            "language": "graphviz",
            "node_count": self.node_count,
            "edge_count": self.edge_count,
            "attribute_key_set": sorted(self.attribute_key_set),
        }


ModelMetrics = Union[UmlMetrics, DotMetrics]


def uml_metrics(model: UmlModel) -> UmlMetrics:
    m = UmlMetrics()
    histogram: Counter[str] = Counter()
    for element in model.elements:
        if isinstance(element, ClassDecl):
            m.class_count += 1
            for member in element.members:
                if isinstance(member, Attribute):
                    m.attribute_count += 1
                elif isinstance(member, Operation):
                    m.operation_count += 1
        elif isinstance(element, EnumDecl):
            m.enum_count += 1
        elif hasattr(element, "kind"):
            m.relationship_count += 1
            histogram[element.kind.value] += 1
    m.relationship_kind_histogram = dict(histogram)
    return m


def dot_metrics(graph: DotGraph) -> DotMetrics:
    keys: set[str] = set()
    for stmt in graph.statements:
        attrs = getattr(stmt, "attrs", None)
        if attrs:
            keys.update(attrs)
        elif hasattr(stmt, "key"):
            keys.add(stmt.key)
    return DotMetrics(
        node_count=len(graph.node_ids()),
        edge_count=len(graph.edges()),
        attribute_key_set=keys,
    )


def metrics(model: Union[UmlModel, DotGraph]) -> ModelMetrics:
    if isinstance(model, UmlModel):
        return uml_metrics(model)
    if isinstance(model, DotGraph):
        return dot_metrics(model)
    raise TypeError(f"unsupported model type: {type(model).__name__}")
