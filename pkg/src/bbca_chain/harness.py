"""Run orchestration and report rendering.

Single runs evaluate the selected invariant checks over one trace; campaigns
sweep seeds (``seed + i``) and fail on the first violating run, carrying a
replayable witness (seed plus event position).  Reports are plain text, one
verdict line per check, with the measured trip counts next to the expected
and reference numbers for uniform failure-free scenarios.
"""

from __future__ import annotations

import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

from . import explore as explore_mod
from .chain import NO_OP
from .scenario import ExploreSpec, HarnessConfig
from .simnet import RunResult, Simulator, trips_to_commit

# Static reference latencies, in trips, for a layered DAG protocol built on
# a 3-trip consistent broadcast: two broadcasts for a leader block, four for
# a non-leader block.
REFERENCE_TRIPS = {"leader": 6, "non-leader": 12}


@dataclass
class RunOutcome:
    config: HarnessConfig
    result: RunResult
    verdicts: dict[str, list[str]]
    wall_ms: float

    @property
    def ok(self) -> bool:
        return (not self.result.failed
                and all(not v for v in self.verdicts.values()))


@dataclass
class CampaignOutcome:
    config: HarnessConfig
    count: int
    runs: int = 0
    failures: list[tuple[int, str]] = field(default_factory=list)  # (seed, what)
    per_check: dict[str, int] = field(default_factory=dict)
    wall_ms: float = 0.0

    @property
    def ok(self) -> bool:
        return not self.failures


def evaluate(result: RunResult, config: HarnessConfig) -> dict[str, list[str]]:
    verdicts: dict[str, list[str]] = {}
    for name, check in config.selected_checks():
        verdicts[name] = check(result, config)
    if result.failed:
        index, text = result.trace.failure
        verdicts.setdefault("runtime", []).append(
            f"safety violation at event {index}: {text}")
    return verdicts


def run_config(config: HarnessConfig) -> RunOutcome:
    started = time.perf_counter()
    result = Simulator(config.scenario).run()
    verdicts = evaluate(result, config)
    wall_ms = (time.perf_counter() - started) * 1000
    return RunOutcome(config, result, verdicts, wall_ms)


def _campaign_worker(args) -> tuple[int, list[tuple[str, str]], str]:
    config, seed = args
    scenario = replace(config.scenario, seed=seed)
    outcome = run_config(replace_config(config, scenario))
    failures = [(name, problems[0])
                for name, problems in outcome.verdicts.items() if problems]
    return seed, failures, outcome.result.trace.digest()


def replace_config(config: HarnessConfig, scenario) -> HarnessConfig:
    clone = HarnessConfig(**{**config.__dict__})
    clone.scenario = scenario
    return clone


def run_campaign(config: HarnessConfig, count: int,
                 jobs: int = 1) -> CampaignOutcome:
    started = time.perf_counter()
    outcome = CampaignOutcome(config, count)
    tasks = [(config, config.scenario.seed + i) for i in range(count)]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_campaign_worker, tasks, chunksize=8))
    else:
        results = [_campaign_worker(task) for task in tasks]
    for seed, failures, _digest in results:
        outcome.runs += 1
        for name, text in failures:
            outcome.per_check[name] = outcome.per_check.get(name, 0) + 1
            outcome.failures.append((seed, text))
    outcome.wall_ms = (time.perf_counter() - started) * 1000
    return outcome


def build_explore_world(spec: ExploreSpec):
    if spec.case == "bbca_correct_sender":
        return explore_mod.bbca_correct_sender()
    if spec.case == "bbca_equivocating_sender":
        return explore_mod.bbca_equivocating_sender()
    if spec.case == "bbca_crashed":
        return explore_mod.bbca_crashed()
    if spec.case == "bbca_replay_with_probes":
        return explore_mod.bbca_replay_with_probes()
    return explore_mod.chain_two_views(timeout_node=spec.timeout_node)


def run_explore(config: HarnessConfig, depth: int,
                max_leaves: int | None = None) -> explore_mod.ExploreResult:
    spec = config.explore
    if spec is None:
        raise ValueError("config has no explore section")
    world = build_explore_world(spec)
    return explore_mod.explore(
        world, depth, max_leaves or spec.max_leaves,
        check_validity=spec.check_validity)


# -- reports -------------------------------------------------------------------

def _latency_lines(outcome: RunOutcome) -> list[str]:
    config, result = outcome.config, outcome.result
    if not config.expect_trips:
        return []
    lines = ["latency (trips = commit delay / hop delay):",
             f"  {'block':<18}{'measured':>9}{'expected':>9}{'reference':>11}"]
    nodes = result.nodes
    witness = result.scenario.correct_nodes()[0]
    for view in config.expect_trips.get("views", []):
        entry = nodes[witness].finalized.get(view)
        if entry is None or entry is NO_OP:
            measured = "-"
        else:
            measured = str(trips_to_commit(result, entry.digest))
        lines.append(f"  {'backbone v' + str(view):<18}{measured:>9}"
                     f"{config.expect_trips['backbone']:>9}"
                     f"{REFERENCE_TRIPS['leader']:>11}")
    if "data" in config.expect_trips:
        for _tick, _node, ref in result.trace.injected:
            try:
                measured = str(trips_to_commit(result, ref))
            except ValueError:
                measured = "-"
            lines.append(f"  {'data ' + ref.hex()[:8]:<18}{measured:>9}"
                         f"{config.expect_trips['data']:>9}"
                         f"{REFERENCE_TRIPS['non-leader']:>11}")
    return lines


def render_report(outcome: RunOutcome) -> str:
    config, result = outcome.config, outcome.result
    trace = result.trace
    lines = [
        f"scenario: {config.name}",
        f"seed: {config.scenario.seed}",
        f"verdict: {'PASS' if outcome.ok else 'FAIL'}",
        f"stop: {trace.stop_reason} after {trace.events_processed} events, "
        f"{outcome.wall_ms:.0f} ms",
        f"trace sha256: {trace.digest()}",
        "",
        "invariants:",
    ]
    for name, problems in outcome.verdicts.items():
        lines.append(f"  {'PASS' if not problems else 'FAIL'} {name}")
        for problem in problems[:5]:
            lines.append(f"    - {problem}")
    if not outcome.ok:
        index = trace.failure[0] if trace.failure else trace.events_processed
        lines.append(f"  witness: seed={config.scenario.seed} "
                     f"event-prefix={index} (rerun with the same config)")
    latency = _latency_lines(outcome)
    if latency:
        lines.append("")
        lines.extend(latency)
    lines.append("")
    lines.append("nodes:")
    for node_id in sorted(result.nodes):
        node = result.nodes[node_id]
        role = config.scenario.strategies.get(node_id)
        tag = f" byzantine:{role.name}" if role else ""
        lines.append(
            f"  node {node_id}: view={node.view} "
            f"last_committed={node.last_committed} "
            f"log_len={len(node.committed_log)}{tag}")
        for position, view, digest, kind, author in node.committed_log_export():
            lines.append(f"    {position:>3} v{view} {kind.lower():<8} "
                         f"a{author} {digest[:16]}")
    return "\n".join(lines) + "\n"


def render_campaign_report(outcome: CampaignOutcome) -> str:
    config = outcome.config
    lines = [
        f"campaign: {config.name}",
        f"seeds: {config.scenario.seed}..{config.scenario.seed + outcome.count - 1}",
        f"runs: {outcome.runs}",
        f"verdict: {'PASS' if outcome.ok else 'FAIL'}",
        f"wall: {outcome.wall_ms:.0f} ms",
    ]
    if outcome.failures:
        lines.append("failures:")
        for seed, text in outcome.failures[:10]:
            lines.append(f"  seed={seed} {text}")
        lines.append("  (rerun any failing seed with `run` for the full trace)")
    return "\n".join(lines) + "\n"


def render_explore_report(config: HarnessConfig, depth: int,
                          result: explore_mod.ExploreResult) -> str:
    lines = [
        f"explore: {config.name} case={config.explore.case} depth={depth}",
        f"leaves: {result.leaves}{' (partial: leaf cap hit)' if result.partial else ''}",
        f"verdict: {'PASS' if result.ok else 'FAIL'}",
    ]
    for problem, witness in result.violations[:10]:
        lines.append(f"  {problem}")
        lines.append(f"    schedule: {' '.join(witness[:24])}"
                     f"{' ...' if len(witness) > 24 else ''}")
    return "\n".join(lines) + "\n"
