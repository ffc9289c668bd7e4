"""Bias classification over a discovered click graph."""

from dataclasses import dataclass

from wpultr.core.errors import GraphError
from wpultr.core.graph import CausalGraph
from wpultr.core.models import CLICK, REL


@dataclass(frozen=True)
class BiasReport:
    """
    Features that bias clicks, read off a causal graph.

    ``confounding`` holds (feature, REL, CLICK) triples: REL→x and a directed
    path x→…→CLICK, so x opens a backdoor path. ``sepp_bias`` holds features
    with a direct edge into CLICK. Undirected edges are not used for either
    list and are reported separately.
    """
    confounding: tuple[tuple[str, str, str], ...] = ()
    sepp_bias: tuple[str, ...] = ()
    undirected: tuple[str, ...] = ()

    @property
    def confounded_features(self) -> tuple[str, ...]:
        return tuple(x for x, _, _ in self.confounding)

    @property
    def is_empty(self) -> bool:
        return not self.confounding and not self.sepp_bias

    def to_dict(self) -> dict:
        return {
            "confounding": [
                {"feature": x, "confounder": z, "effect": y} for x, z, y in self.confounding
            ],
            "sepp_bias": list(self.sepp_bias),
            "undirected_edges": list(self.undirected),
        }


def classify_biases(graph: CausalGraph) -> BiasReport:
    """
    Read confounding and SEPP bias off a discovered graph.

    A feature x confounds when REL→x is directed and a directed path leads
    from x to CLICK. It carries SEPP bias when x→CLICK is directed. Undirected
    edges are rendered into ``undirected`` and count toward neither list.

    Raises:
        GraphError: If the graph lacks REL or CLICK.
    """
    if REL not in graph.nodes or CLICK not in graph.nodes:
        raise GraphError("bias classification needs REL and CLICK nodes")
    confounding = []
    sepp_bias = []
    for x in graph.feature_nodes:
        if graph.has_directed(REL, x) and graph.has_directed_path(x, CLICK):
            confounding.append((x, REL, CLICK))
        if graph.has_directed(x, CLICK):
            sepp_bias.append(x)
    return BiasReport(
        tuple(confounding),
        tuple(sepp_bias),
        tuple(e.render() for e in graph.undirected_edges),
    )

