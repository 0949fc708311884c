from __future__ import annotations

import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from atrapos.hin import Hin, load_hin
from atrapos.synth import SynthEdgeType, SynthNodeType, SynthSpec, synth_hin

DATA = Path(__file__).parent / "data"

SCHOLARLY_NODE_FILES = {s: DATA / "scholarly" / f"nodes_{s}.csv" for s in "APVT"}
SCHOLARLY_EDGE_FILES = {
    s: DATA / "scholarly" / f"edges_{s}.csv" for s in ("AP", "PA", "PV", "VP", "PT", "TP")
}


@pytest.fixture(scope="session")
def scholarly() -> Hin:
    """Toy publications network: 4 authors, 5 papers, 2 venues, 3 topics."""
    return load_hin(DATA / "scholarly" / "schema.json", SCHOLARLY_NODE_FILES, SCHOLARLY_EDGE_FILES)


def news_spec() -> SynthSpec:
    """News-style schema: intermediaries, companies, persons, articles, and
    article attributes (locations, themes, organisations)."""
    return SynthSpec(
        node_types=[
            SynthNodeType("I", 3, int_props={"year": (2000, 2020)}),
            SynthNodeType("C", 5, int_props={"year": (2000, 2020)}),
            SynthNodeType("P", 30, int_props={"year": (2000, 2020)}),
            SynthNodeType("A", 40, int_props={"year": (2000, 2020)}),
            SynthNodeType("L", 6, int_props={"year": (2000, 2020)}),
            SynthNodeType("T", 8, int_props={"year": (2000, 2020)}),
            SynthNodeType("O", 10, int_props={"year": (2000, 2020)}),
        ],
        edge_types=[
            SynthEdgeType("IC", "I", "C", 4, reverse_symbol="CI"),
            SynthEdgeType("CP", "C", "P", 40, reverse_symbol="PC"),
            SynthEdgeType("PA", "P", "A", 90, reverse_symbol="AP"),
            SynthEdgeType("AL", "A", "L", 70, reverse_symbol="LA"),
            SynthEdgeType("AT", "A", "T", 80, reverse_symbol="TA"),
            SynthEdgeType("AO", "A", "O", 90, reverse_symbol="OA"),
        ],
    )


@pytest.fixture(scope="session")
def news(tmp_path_factory):
    hin, truth = synth_hin(news_spec(), tmp_path_factory.mktemp("news"), seed=11)
    return hin, truth


@pytest.fixture(scope="session")
def scholarly_synth(tmp_path_factory):
    """Mid-sized random publications-shaped network with recorded truth."""
    spec = SynthSpec(
        node_types=[
            SynthNodeType("A", 60),
            SynthNodeType("P", 90, int_props={"year": (2010, 2026)}),
            SynthNodeType("V", 8),
            SynthNodeType("T", 12),
        ],
        edge_types=[
            SynthEdgeType("AP", "A", "P", 200, reverse_symbol="PA"),
            SynthEdgeType("PV", "P", "V", 90, reverse_symbol="VP"),
            SynthEdgeType("PT", "P", "T", 160, reverse_symbol="TP"),
        ],
    )
    return synth_hin(spec, tmp_path_factory.mktemp("scholarly_synth"), seed=5)
