"""Seeded synthetic populations exercising the full pipeline offline.

Agents "chat" by emitting archetype-scripted messages, so the real interview
state machine, dedup pool, story chain and vote ledger all run unmodified.
The gateway runs in scripted mode: every response is a deterministic function
of the request, so a seed fully determines the event log and graph export.

The default population is a referral chain: several common baseline values
feed edges into a popular mid-tier value, which feeds a single edge into a
rare "expert" value that sits at the top of the latent wisdom ordering. The
expert value collects few direct votes but accumulates transitive PageRank
mass.
"""

from __future__ import annotations

import json
import random
import re
from dataclasses import dataclass, field
from pathlib import Path

from .aggregation import EdgeAcceptancePolicy, PageRankParams
from .analytics import (
    RankTrajectory,
    rate_ideology,
    robustness_table,
    scaling_trajectory,
)
from .gateway import GatewayConfig, LLMGateway
from .model import MoralGraph, Scenario
from .platform import Deployment

SURVEY_EXPRESSED = "The values I submitted and voted for express what I care about"
SURVEY_FAIR = "My value ended up in a fair position in the moral graph"


class SimulationError(Exception):
    pass


@dataclass(frozen=True)
class Archetype:
    name: str
    scenario: str
    prevalence: float  # among non-expert agents; experts use expert_fraction
    latent_rank: int   # higher is wiser in the latent ordering
    opener: str
    ideology_score: int
    card_title: str
    card_summary: str
    policies: tuple[str, ...]
    expert: bool = False
    experience_phrase: str = ""


def default_archetypes() -> tuple[Archetype, ...]:
    return (
        Archetype(
            name="firm-rules", scenario="parenting", prevalence=0.32,
            latent_rank=0,
            opener=("Kids today have no discipline! Make him follow the rules, "
                    "no screens until the homework is done. Spare the rod, "
                    "spoil the child."),
            ideology_score=5,
            card_title="Firm Rules",
            card_summary="Hold a clear line so the child knows what is expected.",
            policies=(
                "RULES that keep the household orderly",
                "CONSEQUENCES that follow when rules are broken",
                "RESPECT for parental authority that rules teach",
            )),
        Archetype(
            name="consistent-consequences", scenario="parenting", prevalence=0.25,
            latent_rank=0,
            opener=("I think consistency matters most; children need to know "
                    "the rules apply every single day."),
            ideology_score=3,
            card_title="Consistent Consequences",
            card_summary="Apply the same expectations every day so the child can rely on them.",
            policies=(
                "CONSEQUENCES applied the same way every time",
                "RULES the child can recite and rely on",
                "RESPECT earned through steady consistency",
            )),
        Archetype(
            name="earned-rewards", scenario="parenting", prevalence=0.13,
            latent_rank=0,
            opener=("When my daughter struggled with homework we agreed on "
                    "small rewards and it helped her build a routine."),
            ideology_score=1,
            card_title="Earned Rewards",
            card_summary="Pair expectations with recognition so effort feels worthwhile.",
            policies=(
                "REWARDS tied to meeting the rules we agreed",
                "CONSEQUENCES balanced with genuine praise",
                "RESPECT shown when expectations are met",
            )),
        Archetype(
            name="inspiring-discipline", scenario="parenting", prevalence=0.30,
            latent_rank=1,
            opener=("I try to show my son examples of people whose discipline "
                    "made their lives better, rather than punishing him."),
            ideology_score=2,
            card_title="Inspiring Discipline",
            card_summary="Help the child find discipline worth admiring rather than imposing it.",
            policies=(
                "EXAMPLES of discipline that can inspire the user",
                "STRATEGIES for instilling discipline",
                "SENSE OF ACHIEVEMENT that comes from disciplined actions",
            )),
        Archetype(
            name="igniting-curiosity", scenario="parenting", prevalence=0.0,
            latent_rank=2, expert=True,
            opener=("As a teacher I watched pupils transform once something "
                    "genuinely caught their interest; force never did that."),
            ideology_score=1,
            experience_phrase="I have taught struggling children for years",
            card_title="Igniting Curiosity",
            card_summary="Follow what genuinely interests the child and let motivation come from there.",
            policies=(
                "SPARKS of genuine curiosity in the child",
                "QUESTIONS the child asks when truly interested",
                "SENSE OF ACHIEVEMENT that comes from following curiosity",
            )),
    )


def default_scenarios() -> dict[str, Scenario]:
    return {
        "parenting": Scenario(
            id="parenting",
            prompt=("My 10-year-old son refuses to do his homework, spending "
                    "all his time at his computer instead. How can I make him "
                    "behave properly?"),
            tag="parenting"),
    }


def default_contexts() -> dict[str, list[str]]:
    return {"parenting": ["When motivation is an issue",
                          "When family trust is strained"]}


@dataclass(frozen=True)
class SyntheticPopulationConfig:
    n_participants: int = 500
    expert_fraction: float = 0.12
    archetypes: tuple[Archetype, ...] = field(default_factory=default_archetypes)
    affirm_prob: float = 0.92
    contrarian_prob: float = 0.05
    unsure_prob: float = 0.04
    abandon_fraction: float = 0.02
    endorse_prob: float = 0.97
    survey_agree_prob: float = 0.9
    seed: int = 1
    generation_interval: int = 25
    trajectory_stride: int = 100

    def __post_init__(self):
        if self.n_participants <= 0:
            raise SimulationError("n_participants must be positive")
        if not 0.0 <= self.expert_fraction <= 1.0:
            raise SimulationError("expert_fraction must be in [0, 1]")
        for p in (self.affirm_prob, self.contrarian_prob, self.unsure_prob,
                  self.abandon_fraction, self.endorse_prob,
                  self.survey_agree_prob):
            if not 0.0 <= p <= 1.0:
                raise SimulationError("probabilities must be in [0, 1]")
        base = [a for a in self.archetypes if not a.expert]
        if abs(sum(a.prevalence for a in base) - 1.0) > 1e-9:
            raise SimulationError("non-expert archetype prevalences must sum to 1")

    @classmethod
    def from_json(cls, path) -> "SyntheticPopulationConfig":
        doc = json.loads(Path(path).read_text())
        if "archetypes" in doc:
            doc["archetypes"] = tuple(
                Archetype(**{**a, "policies": tuple(a["policies"])})
                for a in doc["archetypes"])
        return cls(**doc)


@dataclass
class ScriptedAgent:
    participant_id: str
    archetype: Archetype
    abandons: bool


def synth_population(config: SyntheticPopulationConfig) -> list[ScriptedAgent]:
    """Deterministic population for a seed; expert count = round(n * fraction)."""
    rng = random.Random(config.seed)
    experts = [a for a in config.archetypes if a.expert]
    base = [a for a in config.archetypes if not a.expert]
    n_expert = round(config.n_participants * config.expert_fraction) if experts else 0
    n_base = config.n_participants - n_expert
    counts = _largest_remainder([a.prevalence for a in base], n_base)
    roster: list[Archetype] = []
    for archetype, count in zip(base, counts):
        roster.extend([archetype] * count)
    for i in range(n_expert):
        roster.append(experts[i % len(experts)])
    rng.shuffle(roster)
    return [
        ScriptedAgent(
            participant_id=f"agent-{i:04d}",
            archetype=arch,
            abandons=rng.random() < config.abandon_fraction)
        for i, arch in enumerate(roster)
    ]


def _largest_remainder(weights: list[float], total: int) -> list[int]:
    raw = [w * total for w in weights]
    counts = [int(x) for x in raw]
    remainder = total - sum(counts)
    order = sorted(range(len(raw)), key=lambda i: (-(raw[i] - counts[i]), i))
    for i in order[:remainder]:
        counts[i] += 1
    return counts


# --- scripted gateway ---

def build_scripted_gateway(config: SyntheticPopulationConfig,
                           contexts_by_scenario: dict[str, list[str]],
                           scenarios: dict[str, Scenario]) -> LLMGateway:
    by_policy_set = {
        frozenset(a.policies): a for a in config.archetypes}
    rank_by_title = {a.card_title: a.latent_rank for a in config.archetypes}
    ideology_by_opener = {a.opener: a.ideology_score for a in config.archetypes}
    contexts_by_prompt = {
        scenarios[sid].prompt: lines
        for sid, lines in contexts_by_scenario.items() if sid in scenarios}

    def elicitation(req):
        system = req.messages[0]["content"]
        user = req.messages[-1]["content"]
        if system.startswith("You are analyzing one turn"):
            message = user.split("LATEST MESSAGE:\n", 1)[-1]
            policies = re.findall(r"I pay attention to ([^.]+)\.", message)
            kind = ("concrete_attention" if policies
                    else "slogan_or_rule" if "!" in message
                    else "stuck_no_story")
            return json.dumps({"kind": kind,
                               "policies": policies,
                               "complete": "That's everything" in message})
        if system.startswith("You are conducting a values interview"):
            return ("Thank you for sharing. What do you pay attention to when "
                    "you choose this way?")
        if system.startswith("You are sanity-checking"):
            return ("You mentioned attending to:\n" + user
                    + "\nDoes attending to these feel like part of living "
                      "well to you, not just useful?")
        if system.startswith("Turn the gathered attentional policies"):
            lines = user.split("Policies:\n", 1)[-1].splitlines()
            policies = tuple(line.strip() for line in lines if line.strip())
            arch = by_policy_set.get(frozenset(policies))
            if arch is None:
                return json.dumps({"title": "Considered Choice",
                                   "summary": "Attend to what matters here.",
                                   "policies": list(policies)})
            return json.dumps({"title": arch.card_title,
                               "summary": arch.card_summary,
                               "policies": list(arch.policies)})
        if system.startswith("The participant has seen"):
            reply = user.split("Participant reply: ", 1)[-1]
            if "stop" in reply.lower():
                return json.dumps({"abandon": True})
            return json.dumps({"confirmed": True})
        raise SimulationError(f"unscripted elicitation prompt: {system[:60]!r}")

    def dedup_judge(req):
        # Distinct archetypes articulate genuinely distinct values.
        return json.dumps({"same_value": False,
                           "rationale": "cards attend to different things"})

    def story_chain(req):
        system = req.messages[0]["content"]
        user = req.messages[-1]["content"]
        if system.startswith("Given values cards relevant"):
            listing = re.findall(r"\[([^\]]+)\] (.+)", user)
            ranked = [(cid, rank_by_title.get(title.strip()))
                      for cid, title in listing]
            ranked = [(cid, r) for cid, r in ranked if r is not None]
            pairs = [[a, b] for a, ra in ranked for b, rb in ranked
                     if rb == ra + 1]
            return json.dumps({"pairs": pairs})
        titles = re.findall(r"(?:FROM|TO) VALUE: (.+)", user)
        pair = " to ".join(t.strip() for t in titles[:2]) or "the transition"
        if "shared meaningful thing" in system:
            return (f"Both values in moving from {pair} were really about "
                    "helping the child grow into a capable person.")
        if "what was clarified" in system:
            return (f"Moving from {pair}, I saw that what mattered was the "
                    "child's own motivation, not my enforcement of it.")
        if "attentional policy" in system:
            policy = re.search(r'"(.+)" changed', system)
            text = policy.group(1) if policy else "this policy"
            return (f"I stopped leaning on {text.lower()} and started noticing "
                    "what draws the child in on their own.")
        if "final first-person story" in system:
            return ("I used to push hard for compliance. One evening I watched "
                    "my son lose himself in a project he chose, and I realized "
                    "the drive I tried to impose was already in him, waiting "
                    "for the right spark.")
        raise SimulationError(f"unscripted story prompt: {system[:60]!r}")

    def context_derivation(req):
        prompt_text = req.messages[-1]["content"].strip()
        lines = contexts_by_prompt.get(prompt_text)
        if lines is None:
            return "When someone asks for guidance"
        return "\n".join(lines)

    def ideology_judge(req):
        message = req.messages[-1]["content"].strip()
        return str(ideology_by_opener.get(message, 2))

    def experience_judge(req):
        transcript = req.messages[-1]["content"]
        phrases = [a.experience_phrase for a in config.archetypes
                   if a.experience_phrase]
        return "yes" if any(p in transcript for p in phrases) else "no"

    return LLMGateway(
        GatewayConfig(mode="scripted", token_budget=10_000_000),
        scripted={
            "elicitation": elicitation,
            "dedup-judge": dedup_judge,
            "story-chain-step": story_chain,
            "context-derivation": context_derivation,
            "ideology-judge": ideology_judge,
            "experience-judge": experience_judge,
        })


# --- the run ---

@dataclass
class SimulationResult:
    deployment: Deployment
    graph: MoralGraph
    trajectory: RankTrajectory
    expert_card: str | None
    sessions_done: int
    sessions_abandoned: int
    endorsement_approvals: int
    endorsement_prompts: int
    ideology_table: dict


def attention_message(archetype: Archetype) -> str:
    parts = [f"I pay attention to {p}." for p in archetype.policies]
    return " ".join(parts) + " That's everything."


def run_simulation(config: SyntheticPopulationConfig,
                   out_dir: str | None = None,
                   acceptance: EdgeAcceptancePolicy | None = None,
                   pagerank_params: PageRankParams | None = None
                   ) -> SimulationResult:
    scenarios = default_scenarios()
    needed = {a.scenario for a in config.archetypes}
    missing = needed - set(scenarios)
    if missing:
        raise SimulationError(f"archetypes reference unknown scenarios: {missing}")
    gateway = build_scripted_gateway(config, default_contexts(), scenarios)
    out_path = Path(out_dir) if out_dir else None
    if out_path:
        out_path.mkdir(parents=True, exist_ok=True)
    deployment = Deployment(
        scenarios=scenarios, gateway=gateway,
        storage_path=str(out_path / "events.jsonl") if out_path else None,
        acceptance=acceptance or EdgeAcceptancePolicy(),
        pagerank_params=pagerank_params or PageRankParams())
    rng = random.Random(config.seed + 1)
    agents = synth_population(config)
    done = abandoned = approvals = prompts = 0

    for i, agent in enumerate(agents):
        arch = agent.archetype
        session = deployment.create_session(agent.participant_id, arch.scenario)
        deployment.post_message(session.id, arch.opener)
        deployment.post_message(session.id, attention_message(arch))
        deployment.post_message(
            session.id, "Yes, attending to these feels like part of living well.")
        if agent.abandons:
            deployment.post_message(session.id, "Actually, please stop here.")
            abandoned += 1
            continue
        deployment.post_message(session.id, "Looks good.")
        deployment.confirm_card(session.id)
        done += 1
        prompts += 1
        approved = rng.random() < config.endorse_prob
        approvals += approved
        deployment.record_endorsement(agent.participant_id, approved)
        agree = rng.random() < config.survey_agree_prob
        deployment.record_survey(
            agent.participant_id, SURVEY_EXPRESSED,
            rng.choice((4, 5)) if agree else rng.choice((2, 3)))
        deployment.record_survey(
            agent.participant_id, SURVEY_FAIR,
            rng.choice((4, 5)) if rng.random() < config.survey_agree_prob
            else rng.choice((1, 2, 3)))
        _vote_on_cards(deployment, agent, rng, config)
        _vote_on_stories(deployment, agent, rng, config)
        if (i + 1) % config.generation_interval == 0:
            deployment.generation_cycle()
    deployment.generation_cycle()

    graph, _ = deployment.run_aggregation()
    expert_card = _expert_canonical(deployment, config)
    trajectory = (
        scaling_trajectory(
            deployment.log.events, expert_card, sorted(graph.values),
            stride=config.trajectory_stride,
            policy=deployment.acceptance, params=deployment.pagerank_params)
        if expert_card else RankTrajectory(target="<none>"))
    ideology_table = _ideology_report(deployment, gateway, scenarios)
    result = SimulationResult(
        deployment=deployment, graph=graph, trajectory=trajectory,
        expert_card=expert_card, sessions_done=done,
        sessions_abandoned=abandoned, endorsement_approvals=approvals,
        endorsement_prompts=prompts, ideology_table=ideology_table)
    if out_path:
        _write_outputs(out_path, deployment, result)
    return result


def _vote_on_cards(deployment, agent, rng, config):
    slate = deployment.card_slate(agent.participant_id)
    own_rank = agent.archetype.latent_rank
    rank_by_title = {a.card_title: a.latent_rank for a in config.archetypes}
    for card in slate:
        rank = rank_by_title.get(card.title, 0)
        if rank > own_rank:
            p = config.affirm_prob
        elif rank == own_rank:
            p = 0.5
        else:
            p = config.contrarian_prob
        if rng.random() < p:
            deployment.vote_card(agent.participant_id, card.id)


def _vote_on_stories(deployment, agent, rng, config):
    stories = deployment.next_stories(agent.participant_id)
    rank_by_title = {a.card_title: a.latent_rank for a in config.archetypes}
    cards = deployment.pool.cards
    for story in stories:
        from_rank = rank_by_title.get(cards[story.from_value].title, 0)
        to_rank = rank_by_title.get(cards[story.to_value].title, 0)
        roll = rng.random()
        if to_rank > from_rank:
            if roll < config.affirm_prob:
                choice = "wiser"
            elif roll < config.affirm_prob + config.unsure_prob:
                choice = "unsure"
            else:
                choice = "not_wiser"
        else:
            if roll < config.contrarian_prob:
                choice = "wiser"
            elif roll < config.contrarian_prob + config.unsure_prob:
                choice = "unsure"
            else:
                choice = "not_wiser"
        deployment.vote_story(agent.participant_id, story.id, choice)


def _expert_canonical(deployment, config) -> str | None:
    expert_titles = {a.card_title for a in config.archetypes if a.expert}
    for cid in deployment.pool.creation_order:
        if deployment.pool.cards[cid].title in expert_titles:
            return cid
    return None


def _ideology_report(deployment, gateway, scenarios) -> dict:
    ratings = {}
    endorsements = {}
    for session in deployment.sessions.values():
        first_user = next(
            (t.content for t in session.transcript if t.role == "user"), None)
        if first_user is None:
            continue
        question = scenarios[session.scenario_id].prompt
        ratings[session.participant_id] = rate_ideology(
            first_user, question, gateway)
    for entry in (e for e in deployment.log.events
                  if e.kind == "survey_response"
                  and e.payload["question"] == SURVEY_EXPRESSED):
        endorsements[entry.payload["participant_id"]] = entry.payload["score"]
    return robustness_table(ratings, endorsements)


def _write_outputs(out_path: Path, deployment, result: SimulationResult):
    (out_path / "graph.json").write_text(deployment.export_graph_text())
    (out_path / "alignment_target.jsonl").write_text(
        deployment.export_alignment_text(include_transitive=False))
    (out_path / "trajectory.csv").write_text(result.trajectory.to_csv())
    (out_path / "ideology_table.json").write_text(
        json.dumps(result.ideology_table, indent=2, sort_keys=True) + "\n")
