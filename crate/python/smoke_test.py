"""Smoke test for the anycq_py extension module.

Build first:  pip install --no-build-isolation -e crates/python
"""

import json

import anycq_py as aq


def main():
    g = aq.KnowledgeGraph.from_triples([("a", "r", "b"), ("b", "s", "c"), ("d", "r", "e")])
    assert g.num_facts == 3 and g.contains("a", "r", "b")
    q = "Q(x) := EXISTS y . r(x,y) & s(y,c:c)"
    assert aq.answers(g, q) == [["a"]]

    pol = aq.Policy.init(hidden_dim=8, mlp_dim=8, seed=1)
    ans, score = aq.solve(pol, g, q)
    assert ans == ["a"] and score == 1.0, (ans, score)
    verdict, _ = aq.solve(pol, g, q, candidate=["d"])
    assert verdict is False

    try:
        aq.solve(pol, g, "Q(x) := r(x,")
    except ValueError as e:
        assert "^" in str(e)
    else:
        raise AssertionError("parse error not raised")

    obs, comp = aq.synthetic_pair(seed=3)
    assert obs.num_facts < comp.num_facts
    pol, logs = aq.train(obs, batches=3, hidden_dim=8, mlp_dim=8)
    assert len(logs) == 3 and all("loss" in l for l in logs)

    lines = aq.generate(obs, comp, count=3, template="2p", seed=5)
    assert len(lines.splitlines()) == 3
    report = json.loads(aq.evaluate(pol, lines, obs, comp, steps=20))
    print("2p F1 after 3 batches:", report)
    print("ok")


if __name__ == "__main__":
    main()
