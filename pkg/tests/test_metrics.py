import io
import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from dyncomm.graph import SliceGraph
from dyncomm.metrics import (
    modularity,
    modularity_with_flag,
    nmi,
    read_metrics_csv,
    score_series,
    write_metrics_csv,
    write_metrics_json,
)

from .oracles import brute_modularity, formula_nmi

TRIANGLES = [(0, 1), (0, 2), (1, 2), (3, 4), (3, 5), (4, 5)]


def random_graph(rng, n, p=None):
    p = rng.uniform(0.05, 0.6) if p is None else p
    W = np.triu((rng.random((n, n)) < p) * rng.uniform(0.5, 3.0, (n, n)), 1)
    W = W + W.T
    if not W.any():
        W[0, n - 1] = W[n - 1, 0] = 1.0
    return W


def test_hand_cases():
    tri = SliceGraph.from_edges(6, TRIANGLES)
    assert modularity(tri, [0] * 6) == pytest.approx(0, abs=1e-15)
    assert modularity(tri, [0, 0, 0, 1, 1, 1]) == pytest.approx(0.5, abs=1e-15)
    bridge = SliceGraph.from_edges(6, TRIANGLES + [(2, 3)])
    assert modularity(bridge, [0, 0, 0, 1, 1, 1]) == pytest.approx(5 / 14, abs=1e-15)


def test_singletons():
    rng = np.random.default_rng(0)
    W = random_graph(rng, 9)
    g = SliceGraph.from_matrix(W)
    d = W.sum(axis=1)
    assert modularity(g, range(9)) == pytest.approx(-np.sum(d**2) / d.sum() ** 2, abs=1e-14)


def test_graph_validation():
    with pytest.raises(ValueError):
        SliceGraph.from_matrix(np.array([[0, 1.0], [2.0, 0]]))
    with pytest.raises(ValueError):
        SliceGraph.from_matrix(np.array([[0, -1.0], [-1.0, 0]]))
    g = SliceGraph.from_edges(3, [(0, 1), (2, 2)], [2.0, 5.0])
    assert g.degree.tolist() == [2.0, 2.0, 5.0] and g.two_L == 9.0
    assert g.induced([0, 1]).two_L == 4.0


def test_edgeless_is_degenerate():
    assert modularity_with_flag(SliceGraph.from_matrix(np.zeros((3, 3))), [0, 1, 1]) == (0.0, True)


def test_label_values_irrelevant_and_mapping_input():
    g = SliceGraph.from_edges(6, TRIANGLES + [(2, 3)])
    q = modularity(g, [0, 0, 0, 1, 1, 1])
    assert modularity(g, ["x", "x", "x", 7, 7, 7]) == pytest.approx(q, abs=1e-15)
    assert modularity(g, {i: int(i > 2) for i in range(6)}) == q
    with pytest.raises(ValueError):
        modularity(g, {0: 0})
    with pytest.raises(ValueError):
        modularity(g, [0, 1])


def test_modularity_matches_oracle():
    rng = np.random.default_rng(1)
    for _ in range(60):
        n = int(rng.integers(1, 30))
        W = random_graph(rng, n) if n > 1 else np.array([[2.0]])
        labels = rng.integers(0, rng.integers(1, n + 1), n)
        q = modularity(SliceGraph.from_matrix(W), labels)
        assert q == pytest.approx(brute_modularity(W.tolist(), labels.tolist()), abs=1e-10)
        assert -0.5 - 1e-12 <= q <= 1 + 1e-12


def test_self_loops_follow_definition():
    W = np.array([[2.0, 1.0, 0], [1.0, 0, 1.0], [0, 1.0, 4.0]])
    for labels in ([0, 0, 1], [0, 1, 2], [1, 1, 1]):
        q = modularity(SliceGraph.from_matrix(W), labels)
        assert q == pytest.approx(brute_modularity(W.tolist(), labels), abs=1e-14)


def test_nmi_hand_case():
    truth = {"a": 0, "b": 0, "c": 0, "d": 1}
    det = {"a": 0, "b": 0, "c": 1, "d": 1}
    assert nmi(truth, det) == pytest.approx(0.3437, abs=1e-4)
    assert nmi(truth, det) == pytest.approx(formula_nmi(truth, det), abs=1e-12)


def test_nmi_special_cases():
    p = [0, 0, 1, 1, 2]
    assert nmi(p, p) == 1.0
    assert nmi(p, [5, 5, 9, 9, 3]) == pytest.approx(1.0, abs=1e-12)
    assert nmi(p, [0] * 5) == 0.0
    assert nmi([0] * 5, p) == 0.0
    assert nmi([0] * 4, [3] * 4) == 1.0


def test_nmi_uses_common_nodes():
    truth = {"a": 0, "b": 0, "c": 1, "d": 1, "z": 4}
    det = {"a": 1, "b": 1, "c": 2, "d": 2, "y": 0}
    assert nmi(truth, det) == pytest.approx(1.0, abs=1e-12)
    with pytest.raises(ValueError):
        nmi({"a": 0}, {"b": 0})


@settings(max_examples=80, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 4), st.integers(0, 4)), min_size=1, max_size=40))
def test_nmi_properties(pairs):
    u = dict(enumerate(a for a, _ in pairs))
    v = dict(enumerate(b for _, b in pairs))
    x = nmi(u, v)
    assert 0 <= x <= 1
    assert x == pytest.approx(nmi(v, u), abs=1e-12)
    assert x == pytest.approx(min(max(formula_nmi(u, v), 0), 1), abs=1e-10)
    relabelled = {n: 10 - c for n, c in v.items()}
    assert nmi(u, relabelled) == pytest.approx(x, abs=1e-12)


def test_score_series():
    s = score_series([(0, 0.6), (1, 0.9), (2, 0.9), (3, 0.6)])
    assert s.mean == pytest.approx(0.75) and s.std == pytest.approx(0.15)
    assert s.formatted() == "0.750±0.15"
    one = score_series([(0, 0.4)])
    assert one.std == 0.0
    with pytest.raises(ValueError):
        score_series([])


def test_metrics_csv_and_json_roundtrip():
    rows = [
        {"slice": 3, "modularity": 0.25, "nmi": 0.5},
        {"slice": 4, "modularity": 0.75, "nmi": None},
    ]
    buf = io.StringIO()
    write_metrics_csv(rows, buf)
    lines = buf.getvalue().splitlines()
    assert lines[0] == "slice,modularity,nmi"
    assert lines[2] == "4,0.75,"
    assert lines[3] == "mean,0.5,0.5" and lines[4] == "std,0.25,0.0"
    assert read_metrics_csv(io.StringIO(buf.getvalue())) == rows
    jbuf = io.StringIO()
    write_metrics_json(rows, jbuf)
    doc = json.loads(jbuf.getvalue())
    assert doc["slices"] == rows
    assert doc["summary"]["modularity"] == {"mean": 0.5, "std": 0.25}
