"""Run-directory layout and on-disk record formats.

A run directory holds: `config` (resolved JSON), `metrics.jsonl`,
`queries.jsonl`, `demos/` (trajectory files), `checkpoints/`, and
`summary.json`.  Trajectory files are JSONL: a header line (map id, source,
seed) followed by one transition per line.
"""

from __future__ import annotations

import json
import os

from .envsim import (Action, Cause, Source, State, Trajectory, Transition, Vec2)


def _dump(doc: dict) -> str:
    return json.dumps(doc, separators=(",", ":"), sort_keys=True)


def append_jsonl(path, doc: dict) -> None:
    with open(path, "a", encoding="utf-8") as fh:
        fh.write(_dump(doc) + "\n")


def read_jsonl(path) -> list[dict]:
    out = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                out.append(json.loads(line))
    return out


def save_trajectory(path, traj: Trajectory, map_name: str, seed=None) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(_dump({"map": map_name, "source": traj.source.value,
                        "seed": seed}) + "\n")
        for i, t in enumerate(traj.transitions):
            fh.write(_dump({
                "t": i,
                "state": list(t.state.as_tuple()),
                "action": [t.action.vx, t.action.vy],
                "reward": t.reward,
                "next_state": list(t.next_state.as_tuple()),
                "done": t.done,
                "cause": t.cause.value,
            }) + "\n")


def load_trajectory(path) -> tuple[Trajectory, dict]:
    rows = read_jsonl(path)
    if not rows:
        raise ValueError(f"empty trajectory file: {path}")
    header, records = rows[0], rows[1:]
    transitions = []
    for r in records:
        sx, sy, gx, gy = r["state"]
        nx, ny, ngx, ngy = r["next_state"]
        transitions.append(Transition(
            State(Vec2(sx, sy), Vec2(gx, gy)),
            Action(*r["action"]),
            float(r["reward"]),
            State(Vec2(nx, ny), Vec2(ngx, ngy)),
            bool(r["done"]),
            Cause(r["cause"]),
        ))
    source = Source(header.get("source", "agent"))
    return Trajectory(transitions, source=source), header


class RunRecorder:
    """Owns the file layout of one run; metrics/queries are appended as the
    run progresses so a crash leaves a readable prefix."""

    def __init__(self, out_dir):
        self.root = str(out_dir)
        os.makedirs(self.root, exist_ok=True)
        self.demos_dir = os.path.join(self.root, "demos")
        self.checkpoints_dir = os.path.join(self.root, "checkpoints")
        os.makedirs(self.demos_dir, exist_ok=True)
        os.makedirs(self.checkpoints_dir, exist_ok=True)
        self.metrics_path = os.path.join(self.root, "metrics.jsonl")
        self.queries_path = os.path.join(self.root, "queries.jsonl")
        for path in (self.metrics_path, self.queries_path):
            open(path, "w").close()
        self._demo_count = 0

    def write_config(self, resolved: dict) -> None:
        with open(os.path.join(self.root, "config"), "w", encoding="utf-8") as fh:
            json.dump(resolved, fh, indent=2, sort_keys=True)
            fh.write("\n")

    def metrics(self, record: dict) -> None:
        append_jsonl(self.metrics_path, record)

    def query(self, record: dict) -> None:
        append_jsonl(self.queries_path, record)

    def save_demo(self, traj: Trajectory, map_name: str, seed=None) -> str:
        path = os.path.join(self.demos_dir, f"demo_{self._demo_count:03d}.jsonl")
        save_trajectory(path, traj, map_name, seed=seed)
        self._demo_count += 1
        return path

    def summary(self, doc: dict) -> None:
        with open(os.path.join(self.root, "summary.json"), "w", encoding="utf-8") as fh:
            json.dump(doc, fh, indent=2, sort_keys=True)
            fh.write("\n")

    def checkpoint_path(self, name: str) -> str:
        return os.path.join(self.checkpoints_dir, name)


def load_run(run_dir) -> dict:
    """Read a run directory back: config, metrics records, summary."""
    out = {"dir": str(run_dir)}
    cfg_path = os.path.join(run_dir, "config")
    with open(cfg_path, "r", encoding="utf-8") as fh:
        out["config"] = json.load(fh)
    out["metrics"] = read_jsonl(os.path.join(run_dir, "metrics.jsonl"))
    summary_path = os.path.join(run_dir, "summary.json")
    if os.path.exists(summary_path):
        with open(summary_path, "r", encoding="utf-8") as fh:
            out["summary"] = json.load(fh)
    return out
