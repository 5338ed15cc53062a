import json
import os
import xml.etree.ElementTree as ET

import numpy as np
import pytest

from early import cli, envsim, harness
from early.config import (ExperimentConfig, config_from_dict, config_to_dict,
                          merge_config)
from early.envsim import Action, Cause
from early.evaluation import convergence_steps, evaluate, seed_stream
from early.oracle import OracleDemoSource, RrtStarConfig
from early.runio import load_run, load_trajectory, save_trajectory
from early.sac import SacConfig, load_agent

from conftest import make_rng, tiny_agent


TINY = dict(env_step_budget=600, eval_every=200, eval_episodes=8, n_d=3,
            n_h=4, exploration_steps=100, batch_size=32, bc_epochs=6,
            sac=SacConfig(hidden=(16, 16)))


def tiny_config(**kw):
    merged = {**TINY, **kw}
    return ExperimentConfig(**merged)


# ---------------------------------------------------------------------------
# seed streams


def test_seed_streams_reproducible():
    a = seed_stream(7, "eval", 1000).standard_normal(4)
    b = seed_stream(7, "eval", 1000).standard_normal(4)
    assert np.array_equal(a, b)


def test_seed_streams_independent_by_label():
    a = seed_stream(7, "eval", 1000).standard_normal(4)
    b = seed_stream(7, "eval", 2000).standard_normal(4)
    c = seed_stream(8, "eval", 1000).standard_normal(4)
    assert not np.array_equal(a, b)
    assert not np.array_equal(a, c)


# ---------------------------------------------------------------------------
# evaluate


def test_evaluate_constant_policy_zero(nav1):
    rate = evaluate(lambda s: Action(0.0, 0.0), nav1, 5, make_rng(0))
    assert rate == 0.0


def test_evaluate_same_stream_identical(nav1):
    agent = tiny_agent(nav1, seed=3)
    a = evaluate(agent, nav1, 20, make_rng(5))
    b = evaluate(agent, nav1, 20, make_rng(5))
    assert a == b


def test_evaluate_does_not_mutate_agent(nav1):
    agent = tiny_agent(nav1, seed=3)
    before = {n: getattr(agent, n).theta.copy()
              for n in ("q1", "q2", "v", "v_target", "policy")}
    evaluate(agent, nav1, 10, make_rng(1))
    for name, theta in before.items():
        assert np.array_equal(getattr(agent, name).theta, theta), name


def test_evaluate_lockstep_matches_sequential(nav1):
    """The batched fast path gives the same result as plain rollouts."""
    agent = tiny_agent(nav1, seed=6)
    fast = evaluate(agent, nav1, 30, make_rng(2))

    from early.sac import mean_action
    slow = evaluate(lambda s: mean_action(agent, s), nav1, 30, make_rng(2))
    assert fast == slow


def test_evaluate_oracle_replay_policy(nav1):
    """A wrapper that replans at each reset reaches the goal essentially
    always."""
    source = OracleDemoSource(nav1, RrtStarConfig(), make_rng(3))

    class OraclePolicy:
        def __init__(self):
            self.actions = []

        def __call__(self, state):
            if not self.actions:
                from early.strategy import Feature
                demo = source.provide_demo(Feature(state.pos))
                self.actions = [t.action for t in demo.transitions]
            return self.actions.pop(0)

    rate = evaluate(OraclePolicy(), nav1, 20, make_rng(4))
    assert rate >= 0.99


# ---------------------------------------------------------------------------
# convergence_steps


def test_convergence_simple():
    curve = [(1000, 0.2), (2000, 0.95), (3000, 0.96)]
    assert convergence_steps(curve, 0.9, 2) == 2000


def test_convergence_never():
    assert convergence_steps([(1000, 0.5), (2000, 0.8)], 0.9, 1) is None


def test_convergence_dip_resets_patience():
    curve = [(1, 0.95), (2, 0.5), (3, 0.92), (4, 0.93), (5, 0.91)]
    assert convergence_steps(curve, 0.9, 2) == 3
    assert convergence_steps(curve, 0.9, 3) == 3


def test_convergence_argument_validation():
    with pytest.raises(ValueError):
        convergence_steps([], 0.0, 1)
    with pytest.raises(ValueError):
        convergence_steps([], 0.5, 0)


# ---------------------------------------------------------------------------
# trajectory files


def test_trajectory_file_round_trip(nav1, tmp_path):
    rng = make_rng(0)
    traj = envsim.rollout(nav1, lambda s: Action(0.3, 0.8), rng)
    path = tmp_path / "traj.jsonl"
    save_trajectory(path, traj, "nav1", seed=7)
    again, header = load_trajectory(path)
    assert header == {"map": "nav1", "source": "agent", "seed": 7}
    assert again.transitions == traj.transitions
    assert again.source == traj.source


# ---------------------------------------------------------------------------
# run_experiment


@pytest.fixture(scope="module")
def tiny_runs(tmp_path_factory):
    """One tiny run per method, shared by the assertions below."""
    root = tmp_path_factory.mktemp("runs")
    out = {}
    for method in ("early", "passive", "bc", "uniform", "sac"):
        cfg = tiny_config(method=method, seed=1)
        out[method] = {
            "summary": harness.run_experiment(cfg, root / method),
            "dir": root / method,
        }
    return out


def test_run_directory_layout(tiny_runs):
    d = tiny_runs["early"]["dir"]
    for name in ("config", "metrics.jsonl", "queries.jsonl", "demos",
                 "checkpoints", "summary.json"):
        assert (d / name).exists(), name
    assert (d / "checkpoints" / "final.npz").exists()


def test_metrics_grid_exact(tiny_runs):
    for method, run in tiny_runs.items():
        rows = load_run(run["dir"])["metrics"]
        assert [r["env_step"] for r in rows] == [200, 400, 600], method


def test_metrics_schema_identical_across_methods(tiny_runs):
    keys = None
    for method, run in tiny_runs.items():
        rows = load_run(run["dir"])["metrics"]
        for row in rows:
            if keys is None:
                keys = set(row.keys())
            assert set(row.keys()) == keys, method
    assert keys == {"env_step", "eval_success_rate", "episodes",
                    "queries_used", "mean_rollout_uncertainty"}


def test_plain_sac_and_passive_log_zero_queries(tiny_runs):
    for method in ("sac", "passive", "bc"):
        rows = load_run(tiny_runs[method]["dir"])["metrics"]
        assert all(r["queries_used"] == 0 for r in rows), method
        assert load_run(tiny_runs[method]["dir"])["summary"]["queries_used"] == 0


def test_query_budget_respected(tiny_runs):
    for method in ("early", "uniform"):
        summary = tiny_runs[method]["summary"]
        assert summary["queries_used"] <= 3, method


def test_passive_preloads_demos(tiny_runs):
    demos = os.listdir(tiny_runs["passive"]["dir"] / "demos")
    assert len(demos) == 3


def test_config_written_resolved(tiny_runs):
    run = load_run(tiny_runs["early"]["dir"])
    assert run["config"]["method"] == "early"
    assert run["config"]["sac"]["hidden"] == [16, 16]
    assert run["config"]["r_query"] is None
    # resolvable back into an identical config object
    cfg = config_from_dict(run["config"])
    assert cfg.validate().resolved_r_query() == 0.35


def test_checkpoint_loads_and_acts(tiny_runs, nav1):
    agent = load_agent(tiny_runs["early"]["dir"] / "checkpoints" / "final.npz")
    rate = evaluate(agent, nav1, 4, make_rng(0))
    assert 0.0 <= rate <= 1.0


def test_runs_are_bit_deterministic(tmp_path):
    cfg = tiny_config(method="early", seed=11)
    harness.run_experiment(cfg, tmp_path / "a")
    harness.run_experiment(cfg, tmp_path / "b")
    for name in ("metrics.jsonl", "queries.jsonl", "config"):
        assert (tmp_path / "a" / name).read_bytes() == \
               (tmp_path / "b" / name).read_bytes(), name


def test_invalid_config_rejected():
    with pytest.raises(ValueError, match="divide"):
        tiny_config(method="early", eval_every=7).validate()
    with pytest.raises(ValueError, match="method"):
        tiny_config(method="dagger").validate()


# ---------------------------------------------------------------------------
# emit_plot


def test_emit_plot_svg(tiny_runs, tmp_path):
    out = harness.emit_plot([tiny_runs["early"]["dir"],
                             tiny_runs["passive"]["dir"],
                             tiny_runs["sac"]["dir"]],
                            tmp_path / "curves")
    assert out.endswith(".svg")
    tree = ET.parse(out)  # valid XML document
    assert tree.getroot().tag.endswith("svg")


def test_emit_plot_requires_runs(tmp_path):
    with pytest.raises(ValueError, match="no run"):
        harness.emit_plot([], tmp_path / "x")


# ---------------------------------------------------------------------------
# CLI


def test_cli_train_and_plot(tmp_path):
    cfg_path = tmp_path / "cfg.json"
    doc = config_to_dict(tiny_config())
    del doc["task"], doc["method"], doc["seed"]
    cfg_path.write_text(json.dumps(doc))
    out = tmp_path / "run1"
    code = cli.main(["train", "--task", "nav1", "--method", "early",
                     "--seed", "1", "--config", str(cfg_path),
                     "--out", str(out)])
    assert code == 0
    assert (out / "metrics.jsonl").exists()

    code = cli.main(["plot", "--runs", str(out), "--out",
                     str(tmp_path / "plot.svg")])
    assert code == 0
    assert (tmp_path / "plot.svg").exists()

    ckpt = out / "checkpoints" / "final.npz"
    code = cli.main(["eval", "--checkpoint", str(ckpt), "--task", "nav1",
                     "--episodes", "4", "--seed", "2"])
    assert code == 0


def test_cli_collect_demos(tmp_path):
    out = tmp_path / "demos"
    code = cli.main(["collect-demos", "--task", "nav1", "--n", "2",
                     "--seed", "3", "--out", str(out)])
    assert code == 0
    files = sorted(os.listdir(out))
    assert files == ["demo_000.jsonl", "demo_001.jsonl"]
    traj, header = load_trajectory(out / files[0])
    assert traj.cause is Cause.GOAL
    assert header["source"] == "oracle"


def test_cli_unknown_flag_exits_2():
    with pytest.raises(SystemExit) as exc:
        cli.main(["train", "--task", "nav1", "--frobnicate"])
    assert exc.value.code == 2


def test_cli_runtime_error_exits_1(tmp_path):
    code = cli.main(["train", "--task", "no-such-map", "--method", "early",
                     "--seed", "1", "--out", str(tmp_path / "x")])
    assert code == 1


def test_cli_flags_override_config_file(tmp_path):
    cfg_path = tmp_path / "cfg.json"
    doc = config_to_dict(tiny_config(seed=1))
    cfg_path.write_text(json.dumps(doc))
    out = tmp_path / "run"
    cli.main(["train", "--config", str(cfg_path), "--task", "nav1",
              "--method", "sac", "--seed", "9", "--steps", "400",
              "--out", str(out)])
    run = load_run(out)
    assert run["config"]["seed"] == 9
    assert run["config"]["method"] == "sac"
    assert run["config"]["env_step_budget"] == 400


def test_merge_config_nested():
    base = {"seed": 1, "sac": {"alpha": 0.1, "lr": 3e-4}}
    out = merge_config(base, {"sac": {"alpha": 0.2}, "task": "nav2"})
    assert out == {"seed": 1, "sac": {"alpha": 0.2, "lr": 3e-4}, "task": "nav2"}
