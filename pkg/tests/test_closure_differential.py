"""Differential check of the cycle-acceptance core.

The closure test answers "does every infinite segment walk carry a trace
with infinitely many progress edges".  An independent oracle for one
periodic walk: unroll its relations into a thread graph over (position,
occurrence) and ask for a cycle through a progress edge.  On random segment
systems, a closure reject must name a walk the thread oracle also refuses,
and under a closure accept every short periodic walk must pass the thread
oracle.
"""

from __future__ import annotations

import random
from itertools import product

from cycproof.cyclic import closure_reject, compose, _normalize


def _thread_graph_accepts(rels) -> bool:
    """True when the periodic walk rels[0], rels[1], ... carries a trace
    with infinitely many progress edges (cycle through a progress edge)."""
    L = len(rels)
    edges = []
    for i, rel in enumerate(rels):
        for s, d, p in rel:
            edges.append(((i, s), ((i + 1) % L, d), p))
    nodes = {u for u, _, _ in edges} | {v for _, v, _ in edges}
    reach = {u: set() for u in nodes}
    adj = {}
    for u, v, _ in edges:
        adj.setdefault(u, set()).add(v)
    for u in nodes:
        seen = set()
        stack = [u]
        while stack:
            x = stack.pop()
            for y in adj.get(x, ()):
                if y not in seen:
                    seen.add(y)
                    stack.append(y)
        reach[u] = seen
    return any(p and u in reach[v] for u, v, p in edges)


def _random_relation(rng: random.Random, occs: int):
    pairs = []
    for s in range(occs):
        for d in range(occs):
            if rng.random() < 0.45:
                pairs.append((s, d, rng.random() < 0.4))
    return _normalize(pairs)


def _random_system(rng: random.Random):
    n_comp = rng.randint(1, 3)
    companions = list(range(n_comp))
    occs = rng.randint(1, 3)
    segments = []
    for idx in range(rng.randint(1, 4)):
        a = rng.choice(companions)
        b = rng.choice(companions)
        segments.append((a, b, _random_relation(rng, occs), [a, f"seg{idx}", b]))
    return segments, companions


def _lassos(segments, max_len: int):
    for length in range(1, max_len + 1):
        for combo in product(range(len(segments)), repeat=length):
            ok = all(
                segments[combo[i]][1] == segments[combo[(i + 1) % length]][0]
                for i in range(length)
            )
            if ok:
                yield [segments[i][2] for i in combo]


def test_closure_against_thread_oracle():
    rng = random.Random(20240)
    rejects = accepts = 0
    for _ in range(400):
        segments, companions = _random_system(rng)
        failure = closure_reject(segments, companions)
        if failure is None:
            accepts += 1
            # every short periodic walk must carry a progressing trace: an
            # accepted system has no empty or non-progressing idempotent
            # summary, so each walk's idempotent power yields one
            for rels in _lassos(segments, 3):
                assert _thread_graph_accepts(rels), (segments, rels)
        else:
            rejects += 1
            _, rel, path = failure
            # the named summary is idempotent and non-progressing; iterating
            # it as a one-segment walk must also fail the thread oracle
            assert compose(rel, rel) == rel
            assert not _thread_graph_accepts([rel]), (segments, rel)
    assert rejects > 50 and accepts > 50  # both branches well exercised
