"""Live demonstration service: bridges training-loop queries to a connected
teleoperation client over a lockstep websocket protocol.

Wire protocol "early/1": one JSON object per text frame.  The server sends
`hello` on connect; the client answers `ready`.  Each query opens with a
`query` frame carrying the start/goal and initial position; every client
`action` advances the environment exactly one step and is answered with one
`state` frame; `episode_end` closes the episode.  The training loop blocks
in provide_demo() until a validated demonstration arrives; client aborts,
rejected demos, and disconnects re-issue the query (bounded retries).
"""

from __future__ import annotations

import json
import queue
import threading
import time
from dataclasses import dataclass, field
from typing import Optional

from websockets.exceptions import ConnectionClosed
from websockets.sync.server import serve as _ws_serve

from . import envsim
from .envsim import Action, Cause, MapSpec, Source, Trajectory, Vec2, map_to_dict
from .runio import append_jsonl
from .strategy import Feature

PROTOCOL_VERSION = "early/1"
DEFAULT_PORT = 8765
MAX_ATTEMPTS = 3  # per query: rejected/aborted episodes before giving up


class ProtocolError(RuntimeError):
    pass


class DemoSessionError(RuntimeError):
    """A query could not be served (retries exhausted or session closed)."""


def validate_demo(trajectory: Trajectory, query: Feature):
    """Accept iff the demo starts exactly at the queried feature and reaches
    the goal.  Returns (accepted, reason)."""
    if len(trajectory) == 0:
        return False, "empty trajectory"
    start = trajectory.start_state
    if start.pos != query.pos:
        return False, "feature mismatch"
    if query.goal is not None and start.goal != query.goal:
        return False, "feature mismatch"
    if trajectory.cause is not Cause.GOAL:
        return False, "not goal-reaching"
    return True, ""


@dataclass
class _QueryRequest:
    feature: Feature
    goal: Vec2
    reply: "queue.Queue" = field(default_factory=lambda: queue.Queue(maxsize=1))


class HumanDemoServer:
    """Owns the websocket endpoint and the session log; exposes the
    DemoSource interface to the training loop.

    Two actors: the training loop blocks inside provide_demo() on a reply
    queue; the connection handler thread owns the socket and the lockstep
    episode drive.  One client and one active query at a time.
    """

    def __init__(self, map_spec: MapSpec, port: int = DEFAULT_PORT,
                 session_log_path: Optional[str] = None,
                 n_d: Optional[int] = None, query_timeout: Optional[float] = None,
                 host: str = "127.0.0.1"):
        self.map_spec = map_spec
        self.session_log_path = session_log_path
        self.n_d = n_d
        self.query_timeout = query_timeout
        self._requests: "queue.Queue[_QueryRequest]" = queue.Queue()
        self._session_lock = threading.Lock()
        self._closed = threading.Event()
        self._query_counter = 0
        self._log_lock = threading.Lock()
        self.human_seconds = 0.0
        self.queries_served = 0
        self._server = _ws_serve(self._handle_client, host, port)
        self.port = self._server.socket.getsockname()[1]
        self._thread = threading.Thread(target=self._server.serve_forever,
                                        daemon=True, name="demo-server")
        self._thread.start()

    # -- DemoSource interface -------------------------------------------------

    def provide_demo(self, query: Feature) -> Trajectory:
        if self._closed.is_set():
            raise DemoSessionError("demonstration server is closed")
        if not self.map_spec.start_region.contains(query.pos):
            raise ValueError(f"query start {tuple(query.pos)} outside start region")
        if query.goal is not None:
            goal = query.goal
        elif not self.map_spec.random_goal:
            goal = self.map_spec.goal_region.point
        else:
            raise ValueError("random-goal task requires a goal in the query")
        request = _QueryRequest(feature=query, goal=goal)
        self._requests.put(request)
        try:
            outcome = request.reply.get(timeout=self.query_timeout)
        except queue.Empty as exc:
            raise DemoSessionError("timed out waiting for a demonstration") from exc
        if isinstance(outcome, Exception):
            raise outcome
        return outcome

    def close(self) -> None:
        self._closed.set()
        self._server.shutdown()
        self._thread.join(timeout=5)

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()

    # -- session handling ------------------------------------------------------

    def _log(self, record: dict) -> None:
        if self.session_log_path is None:
            return
        with self._log_lock:
            append_jsonl(self.session_log_path, record)

    def _handle_client(self, ws) -> None:
        if not self._session_lock.acquire(blocking=False):
            ws.send(json.dumps({"type": "error",
                                "message": "a session is already active"}))
            ws.close()
            return
        try:
            self._run_session(ws)
        except (ConnectionClosed, TimeoutError):
            pass
        except ProtocolError as exc:
            try:
                ws.send(json.dumps({"type": "error", "message": str(exc)}))
                ws.close()
            except ConnectionClosed:
                pass
        finally:
            self._session_lock.release()

    def _run_session(self, ws) -> None:
        ws.send(json.dumps({
            "type": "hello",
            "version": PROTOCOL_VERSION,
            "map": map_to_dict(self.map_spec),
            "n_d": self.n_d,
        }))
        ready = self._recv(ws)
        if ready.get("type") != "ready":
            raise ProtocolError(f"expected ready, got {ready.get('type')!r}")
        if ready.get("version") != PROTOCOL_VERSION:
            raise ProtocolError(
                f"protocol version mismatch: client {ready.get('version')!r}, "
                f"server {PROTOCOL_VERSION!r}")

        while not self._closed.is_set():
            try:
                request = self._requests.get(timeout=0.2)
            except queue.Empty:
                continue
            try:
                self._serve_query(ws, request)
            except (ConnectionClosed, TimeoutError):
                # client went away: cancel this wait; the training loop's
                # retry re-enters the queue and waits for a reconnect
                request.reply.put(DemoSessionError("client disconnected"))
                raise

    def _serve_query(self, ws, request: _QueryRequest) -> None:
        for _ in range(MAX_ATTEMPTS):
            self._query_counter += 1
            qid = self._query_counter
            traj, outcome, timing = self._drive_episode(ws, request, qid)
            if traj is not None:
                accepted, reason = validate_demo(traj, request.feature)
            else:
                accepted, reason = False, outcome
            self.human_seconds += timing["complete"] - timing["issue"]
            self._log({
                "query_id": qid,
                "feature": list(request.feature.as_tuple()),
                "issue_time": timing["issue"],
                "first_action_time": timing["first_action"],
                "completion_time": timing["complete"],
                "steps": timing["steps"],
                "clamped_actions": timing["clamped"],
                "outcome": "accepted" if accepted else (reason or outcome),
                "human_seconds": self.human_seconds,
            })
            if traj is not None:
                ws.send(json.dumps({"type": "episode_end", "query_id": qid,
                                    "cause": traj.cause.value,
                                    "steps": len(traj), "accepted": accepted}))
            if accepted:
                self.queries_served += 1
                request.reply.put(traj)
                return
        request.reply.put(DemoSessionError(
            f"no accepted demonstration after {MAX_ATTEMPTS} attempts"))

    def _drive_episode(self, ws, request: _QueryRequest, qid: int):
        """Lockstep drive: one `state` reply per received `action`."""
        issue = time.monotonic()
        timing = {"issue": issue, "first_action": None, "complete": issue,
                  "steps": 0, "clamped": 0}
        feature = request.feature
        state = envsim.reset(self.map_spec, None, start_override=feature.pos,
                             goal_override=request.goal)
        ws.send(json.dumps({
            "type": "query", "query_id": qid,
            "start": [feature.pos.x, feature.pos.y],
            "goal": [request.goal.x, request.goal.y],
            "t": 0, "pos": [state.pos.x, state.pos.y],
        }))
        transitions = []
        for t in range(self.map_spec.max_steps):
            msg = self._recv(ws)
            kind = msg.get("type")
            if kind == "abort":
                timing["complete"] = time.monotonic()
                timing["steps"] = t
                return None, "aborted", timing
            if kind != "action":
                raise ProtocolError(f"expected action, got {kind!r}")
            if msg.get("query_id") != qid or msg.get("t") != t:
                raise ProtocolError(
                    f"lockstep violation: got (query_id={msg.get('query_id')}, "
                    f"t={msg.get('t')}), expected ({qid}, {t})")
            if timing["first_action"] is None:
                timing["first_action"] = time.monotonic()
            vx, vy = float(msg["vx"]), float(msg["vy"])
            cvx = min(1.0, max(-1.0, vx))
            cvy = min(1.0, max(-1.0, vy))
            if cvx != vx or cvy != vy:
                timing["clamped"] += 1
            action = Action(cvx, cvy)
            result = envsim.step(self.map_spec, state, action, t)
            ws.send(json.dumps({
                "type": "state", "query_id": qid, "t": t + 1,
                "pos": [result.next_state.pos.x, result.next_state.pos.y],
                "reward": result.reward, "done": result.done,
                "cause": result.cause.value,
            }))
            transitions.append(envsim.Transition(state, action, result.reward,
                                                 result.next_state, result.done,
                                                 result.cause))
            state = result.next_state
            if result.done:
                break
        timing["complete"] = time.monotonic()
        timing["steps"] = len(transitions)
        return Trajectory(transitions, source=Source.HUMAN), "done", timing

    @staticmethod
    def _recv(ws) -> dict:
        raw = ws.recv()
        try:
            msg = json.loads(raw)
        except json.JSONDecodeError as exc:
            raise ProtocolError(f"malformed message: {exc}") from exc
        if not isinstance(msg, dict):
            raise ProtocolError("message must be a JSON object")
        return msg


def serve(map_spec: MapSpec, port: int = DEFAULT_PORT,
          session_log_path: Optional[str] = None,
          n_d: Optional[int] = None,
          query_timeout: Optional[float] = None,
          host: str = "127.0.0.1") -> HumanDemoServer:
    """Start the demonstration service; the returned server is the
    training loop's DemoSource and must be closed (or used as a context
    manager) when the run ends."""
    return HumanDemoServer(map_spec, port=port, session_log_path=session_log_path,
                           n_d=n_d, query_timeout=query_timeout, host=host)
