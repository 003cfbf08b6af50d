"""Acceptance suite: one test per top-level criterion, each ending in a single
pass/fail line (the -v test status). Tolerances are pinned here, not imported.

The exhaustive vote-monotonicity criterion (test_transitive_vote_property)
fails by design: the property as stated is false for normalized PageRank with
uniform dangling redistribution, and the test reports the minimal
counterexample rather than weakening the check. The companion test directly
below it verifies the restricted form that does hold (fresh voters, raw
drop-dangling scores) with zero counterexamples.
"""

import itertools
import json
import logging
import random
import time
from pathlib import Path

import numpy as np
import pytest

from moralgraph.aggregation import (
    PageRankParams,
    aggregate,
    context_id_for,
    detect_and_break_cycles,
    export_alignment_target,
    pagerank,
)
from moralgraph.analytics import rate_ideology
from moralgraph.dedup import CanonicalPool
from moralgraph.gateway import GatewayConfig, LLMGateway
from moralgraph.graphio import import_graph
from moralgraph.model import MoralContext
from moralgraph.simulation import SyntheticPopulationConfig, run_simulation
from moralgraph.stories import StoryEngine
from tests.conftest import make_card, make_edge, scripted_gateway
from tests.oracles import (
    dense_pagerank,
    is_acyclic,
    random_digraph,
    reachability_closure,
    solve_pagerank_batch,
)
from tests.test_aggregation import build_graph, edges_from_pairs
from tests.test_dedup import judge_never_same, random_cards

FIXTURES = Path(__file__).parent / "fixtures"
CASE_STUDY = FIXTURES / "case_study" / "graph.json"

log = logging.getLogger("acceptance")


def test_pagerank_oracle_equivalence():
    """200 seeded random digraphs (<=12 nodes): engine matches the dense
    10^4-iteration oracle within 1e-8 L1; scores sum to 1 +/- 1e-9; <10s."""
    rng = random.Random(20_240_817)
    start = time.monotonic()
    for _ in range(200):
        nodes, pairs = random_digraph(rng, 12)
        scores = pagerank(nodes, edges_from_pairs(pairs)).scores
        oracle = dense_pagerank(
            len(nodes), [(nodes.index(u), nodes.index(v)) for u, v in pairs])
        l1 = sum(abs(scores[n] - oracle[i]) for i, n in enumerate(nodes))
        assert l1 < 1e-8, f"L1 divergence {l1} on {pairs}"
        assert abs(sum(scores.values()) - 1.0) <= 1e-9
    elapsed = time.monotonic() - start
    assert elapsed < 10.0, f"took {elapsed:.1f}s"


def _enumerate_free_edges(n):
    """All ordered node pairs over n nodes except the pinned a->d and the
    added x->a. Nodes 0=a, 1=d, 2=x."""
    pairs = [(u, v) for u in range(n) for v in range(n) if u != v]
    pairs.remove((0, 1))  # a->d always present
    pairs.remove((2, 0))  # x->a is the edge under test
    return pairs


def _exhaustive_counterexamples(n, params, batch=4096, stop_after=3):
    """Graphs over n nodes where adding x->a fails to strictly raise d."""
    free = _enumerate_free_edges(n)
    found = []
    combos = itertools.product((0, 1), repeat=len(free))
    while True:
        chunk = list(itertools.islice(combos, batch))
        if not chunk:
            break
        B = len(chunk)
        adj = np.zeros((2 * B, n, n))
        for b, mask in enumerate(chunk):
            adj[b, 0, 1] = 1.0
            for bit, (u, v) in zip(mask, free):
                if bit:
                    adj[b, u, v] = 1.0
            adj[B + b] = adj[b]
            adj[B + b, 2, 0] = 1.0  # with x->a added
        scores = solve_pagerank_batch(
            adj, damping=params.damping,
            dangling=params.dangling, normalize=params.normalize)
        bad = np.nonzero(scores[B:, 1] <= scores[:B, 1] + 1e-15)[0]
        for b in bad[:stop_after - len(found)]:
            mask = chunk[b]
            edges = [(0, 1)] + [e for bit, e in zip(mask, free) if bit]
            found.append((n, edges, float(scores[b, 1]), float(scores[B + b, 1])))
        if len(found) >= stop_after:
            break
    return found


def _engine_matches_batch_oracle(params, samples=50):
    rng = random.Random(4)
    for _ in range(samples):
        n = rng.randint(3, 5)
        pairs = [(u, v) for u in range(n) for v in range(n)
                 if u != v and rng.random() < 0.4]
        nodes = [f"n{i}" for i in range(n)]
        scores = pagerank(
            nodes, edges_from_pairs([(nodes[u], nodes[v]) for u, v in pairs]),
            params).scores
        adj = np.zeros((1, n, n))
        for u, v in pairs:
            adj[0, u, v] += 1.0
        oracle = solve_pagerank_batch(adj, damping=params.damping,
                                      dangling=params.dangling,
                                      normalize=params.normalize)[0]
        assert max(abs(scores[nodes[i]] - oracle[i]) for i in range(n)) < 1e-7


def test_transitive_vote_property():
    """Exhaustive over digraphs with <=5 nodes containing a->d: adding a new
    vote x->a strictly increases score(d); verified against an exact oracle."""
    params = PageRankParams()
    _engine_matches_batch_oracle(params)
    counterexamples = []
    for n in (3, 4, 5):
        counterexamples.extend(_exhaustive_counterexamples(n, params))
        if counterexamples:
            break
    assert not counterexamples, (
        "property is FALSE for normalized uniform-dangling PageRank; minimal "
        f"counterexample (nodes 0=a, 1=d, 2=x): edges={counterexamples[0][1]} "
        f"score(d) {counterexamples[0][2]:.6f} -> {counterexamples[0][3]:.6f} "
        "after adding x->a. See the restricted form in "
        "test_fresh_voter_monotonicity_raw_scores.")


def test_fresh_voter_monotonicity_raw_scores():
    """Restricted form that holds: if x has no prior out-edges and scores are
    raw (unnormalized) with dangling mass dropped, adding x->a strictly
    increases score(d). Exhaustive over <=5 nodes; zero counterexamples."""
    params = PageRankParams(dangling="drop", normalize=False)
    _engine_matches_batch_oracle(params)
    for n in (3, 4, 5):
        free = [e for e in _enumerate_free_edges(n) if e[0] != 2]
        combos = itertools.product((0, 1), repeat=len(free))
        while True:
            chunk = list(itertools.islice(combos, 8192))
            if not chunk:
                break
            B = len(chunk)
            adj = np.zeros((2 * B, n, n))
            for b, mask in enumerate(chunk):
                adj[b, 0, 1] = 1.0
                for bit, (u, v) in zip(mask, free):
                    if bit:
                        adj[b, u, v] = 1.0
                adj[B + b] = adj[b]
                adj[B + b, 2, 0] = 1.0
            scores = solve_pagerank_batch(adj, dangling="drop", normalize=False)
            assert (scores[B:, 1] > scores[:B, 1]).all(), (
                f"monotonicity violated at n={n}")


def test_cycle_breaking_always_acyclic():
    """500 random digraphs: the surviving edge set is always acyclic."""
    rng = random.Random(99)
    for _ in range(500):
        nodes, pairs = random_digraph(rng, 9, p=rng.uniform(0.1, 0.6))
        edges = edges_from_pairs(pairs, wiser=rng.randint(0, 9))
        kept, removed, _ = detect_and_break_cycles(
            edges, drop_entire_cycle=rng.random() < 0.5)
        assert is_acyclic(nodes, [(e.from_value, e.to_value) for e in kept])
        assert len(kept) + len(removed) == len(edges)


def test_case_study_single_cycle():
    """With drop_entire_cycle on the published case-study graph: exactly one
    cycle found and all of its edges ignored. Skipped when not vendored."""
    if not CASE_STUDY.exists():
        log.warning("case-study graph fixture not vendored at %s; criterion "
                    "skipped, not faked", CASE_STUDY)
        pytest.skip("case-study graph fixture unavailable in this environment")
    graph = import_graph(CASE_STUDY.read_text())
    kept, removed, cycles = detect_and_break_cycles(
        list(graph.edges.values()), drop_entire_cycle=True)
    assert cycles == 1
    assert is_acyclic(list(graph.values),
                      [(e.from_value, e.to_value) for e in kept])


def test_dedup_idempotence_1000_cards():
    """Replaying a 1000-card corpus twice yields byte-identical pools; exact
    duplicates never grow the pool."""
    rng = random.Random(5)
    corpus = random_cards(rng, 1000)
    for i in range(0, 1000, 3):
        src = corpus[rng.randrange(i + 1)]
        corpus[i] = make_card(f"dup-{i:04d}", src.title,
                              [p.text for p in src.policies], summary=src.summary)
    exports, sizes = [], []
    for _ in range(2):
        pool = CanonicalPool(scripted_gateway(judge_never_same()))
        before_after = []
        for card in corpus:
            n_before = len(pool)
            result = pool.canonicalize(card)
            before_after.append((n_before, len(pool), result.coalesced))
        exports.append(json.dumps(pool.export(), sort_keys=True))
        sizes.append(len(pool))
    assert exports[0] == exports[1]
    assert sizes[0] == sizes[1]
    assert all(after == before for before, after, coalesced in before_after
               if coalesced), "a coalesced card grew the pool"


def test_scaling_reproduction():
    """500-agent referral-chain runs, seeds 1-20: expert card finishes with
    PageRank rank 1 and direct-vote rank >= 2 in at least 18 seeds; <2min."""
    start = time.monotonic()
    good = 0
    finals = []
    for seed in range(1, 21):
        result = run_simulation(SyntheticPopulationConfig(
            n_participants=500, seed=seed))
        final = result.trajectory.steps[-1]
        finals.append((seed, final["pagerank_rank"], final["direct_vote_rank"]))
        if final["pagerank_rank"] == 1 and final["direct_vote_rank"] >= 2:
            good += 1
    elapsed = time.monotonic() - start
    assert good >= 18, f"only {good}/20 seeds: {finals}"
    assert elapsed < 120.0, f"took {elapsed:.1f}s"


def test_hermetic_replay_byte_identical(tmp_path):
    """Same seed, same fixtures: two runs produce byte-identical event logs,
    graph exports and alignment-target exports."""
    config = SyntheticPopulationConfig(n_participants=60, seed=11,
                                       generation_interval=15)
    run_simulation(config, out_dir=str(tmp_path / "a"))
    run_simulation(config, out_dir=str(tmp_path / "b"))
    for name in ("events.jsonl", "graph.json", "alignment_target.jsonl"):
        a = (tmp_path / "a" / name).read_bytes()
        b = (tmp_path / "b" / name).read_bytes()
        assert a == b, f"{name} not byte-identical"


def test_story_chain_fidelity():
    """Vendored discipline->curiosity fixture replays into a complete chain
    with a mapping for each of the 3 source policies."""
    from tests.conftest import CURIOSITY_POLICIES, DISCIPLINE_POLICIES

    gateway = LLMGateway(GatewayConfig(
        mode="replay", fixture_dir=str(FIXTURES / "story_chain")))
    discipline = make_card("card-discipline", "Inspiring Discipline",
                           DISCIPLINE_POLICIES,
                           summary="Show the child discipline worth admiring.")
    curiosity = make_card("card-curiosity", "Igniting Curiosity",
                          CURIOSITY_POLICIES,
                          summary="Let the child's own interest drive the work.")
    text = "When motivation is an issue"
    context = MoralContext(context_id_for(text), text, "parenting")
    story = StoryEngine(gateway).generate_story(
        (discipline.id, curiosity.id), context,
        {c.id: c for c in (discipline, curiosity)})
    assert story.shared_good.strip() and story.clarification.strip() \
        and story.final_story.strip()
    assert len(story.policy_mappings) == 3
    assert {m.old_policy for m in story.policy_mappings} \
        == set(DISCIPLINE_POLICIES)


def test_ideology_pipeline():
    """The canonical slogan reply rates 5/"very" through the vendored judge
    fixture, and a simulation corpus populates all three ideology buckets."""
    gateway = LLMGateway(GatewayConfig(
        mode="replay", fixture_dir=str(FIXTURES / "ideology")))
    rating = rate_ideology("Do what Jesus would want.",
                           "Can you help me end my pregnancy?", gateway)
    assert rating.score == 5 and rating.bucket == "very"
    result = run_simulation(SyntheticPopulationConfig(
        n_participants=60, seed=1, generation_interval=15))
    table = result.ideology_table
    assert set(table) == {"not", "slightly", "very"}
    for bucket, entry in table.items():
        assert entry["count"] > 0, f"bucket {bucket!r} empty"
        assert entry["mean_endorsement"] is not None


def test_alignment_target_export():
    """Exactly one record per accepted surviving edge; transitive closure
    matches the reachability oracle on graphs <= 8 nodes; omitted edges appear
    only in the omissions list."""
    rng = random.Random(31)
    for _ in range(60):
        nodes, pairs = random_digraph(rng, 8, p=0.35)
        edges = []
        for i, (u, v) in enumerate(pairs):
            wiser, not_wiser = rng.choice(
                [(9, 0), (9, 0), (5, 4), (0, 9), (1, 0)])
            edges.append(make_edge(f"e{i:03d}", u, v,
                                   wiser=wiser, not_wiser=not_wiser))
        graph = build_graph(nodes, edges)
        result = aggregate(graph)
        surviving = [e for e in graph.edges.values()
                     if e.status == "accepted"
                     and e.id not in result.removed_cycle_edges]
        direct = export_alignment_target(graph)
        assert len(direct) == len(surviving)
        assert {r.provenance[0] for r in direct} == {e.id for e in surviving}
        closure = export_alignment_target(graph, include_transitive=True)
        got = {(r.dispreferred, r.preferred) for r in closure}
        want = reachability_closure(
            nodes, [(e.from_value, e.to_value) for e in surviving])
        assert got == want
        omitted = {e.id for e in graph.edges.values() if e.status == "omitted"}
        assert omitted == set(result.omissions)
        assert not omitted & {r.provenance[0] for r in direct}


def test_case_study_counts():
    """The published dataset imports as 85 values / 100 edges when vendored;
    otherwise this criterion is skipped and logged, never faked."""
    if not CASE_STUDY.exists():
        log.warning("case-study dataset fixture not vendored at %s; criterion "
                    "skipped, not faked", CASE_STUDY)
        pytest.skip("case-study dataset fixture unavailable in this environment")
    graph = import_graph(CASE_STUDY.read_text())
    assert len(graph.values) == 85
    assert len(graph.edges) == 100
