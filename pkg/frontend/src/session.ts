// Lockstep teleoperation session: one action per tick, never before the
// previous state reply arrived. DOM-free so the discipline is testable
// headless.

import {
  EpisodeEndMsg,
  HelloMsg,
  MapDoc,
  PROTOCOL_VERSION,
  QueryMsg,
  StateMsg,
  abortFrame,
  actionFrame,
  parseServerMsg,
  readyFrame,
} from "./protocol.js";
import { clamp } from "./input.js";

export interface SocketLike {
  send(data: string): void;
}

export type Phase = "handshake" | "waiting" | "driving" | "error";

export interface Banner {
  kind: "info" | "success" | "failure" | "error";
  text: string;
}

export class UiSession {
  phase: Phase = "handshake";
  map: MapDoc | null = null;
  nD: number | null = null;
  query: QueryMsg | null = null;
  pos: [number, number] | null = null;
  trail: [number, number][] = [];
  demosCompleted = 0;
  humanSeconds = 0;
  banner: Banner = { kind: "info", text: "connecting..." };

  private nextT = 0;
  private awaitingState = false;
  private queryStartedAt: number | null = null;
  private readonly socket: SocketLike;
  private readonly now: () => number;

  constructor(socket: SocketLike, now: () => number = () => Date.now() / 1000) {
    this.socket = socket;
    this.now = now;
  }

  onFrame(raw: string): void {
    const msg = parseServerMsg(raw);
    switch (msg.type) {
      case "hello":
        this.onHello(msg);
        break;
      case "query":
        this.onQuery(msg);
        break;
      case "state":
        this.onState(msg);
        break;
      case "episode_end":
        this.onEpisodeEnd(msg);
        break;
      case "error":
        this.phase = "error";
        this.banner = { kind: "error", text: `server error: ${msg.message}` };
        break;
    }
  }

  private onHello(msg: HelloMsg): void {
    if (msg.version !== PROTOCOL_VERSION) {
      this.phase = "error";
      this.banner = {
        kind: "error",
        text: `protocol version mismatch: server ${msg.version}, ` +
          `client ${PROTOCOL_VERSION}`,
      };
      return;
    }
    this.map = msg.map;
    this.nD = msg.n_d;
    this.phase = "waiting";
    this.banner = { kind: "info", text: "connected; waiting for a query" };
    this.socket.send(readyFrame());
  }

  private onQuery(msg: QueryMsg): void {
    this.query = msg;
    this.pos = msg.pos;
    this.trail = [msg.pos];
    this.nextT = 0;
    this.awaitingState = false;
    this.phase = "driving";
    this.queryStartedAt = this.now();
    this.banner = {
      kind: "info",
      text: `give a demonstration from (${msg.start[0].toFixed(1)}, ` +
        `${msg.start[1].toFixed(1)}) to the goal`,
    };
  }

  private onState(msg: StateMsg): void {
    if (this.query === null || msg.query_id !== this.query.query_id) {
      return; // stale frame from an aborted episode
    }
    this.pos = msg.pos;
    this.trail.push(msg.pos);
    this.awaitingState = false;
    this.nextT = msg.t;
  }

  private onEpisodeEnd(msg: EpisodeEndMsg): void {
    if (this.queryStartedAt !== null) {
      this.humanSeconds += this.now() - this.queryStartedAt;
      this.queryStartedAt = null;
    }
    this.phase = "waiting";
    this.query = null;
    if (msg.accepted) {
      this.demosCompleted += 1;
      this.banner = {
        kind: "success",
        text: `demonstration accepted (${msg.steps} steps)`,
      };
    } else {
      const reason = msg.cause === "goal" ? "rejected" : msg.cause;
      this.banner = {
        kind: "failure",
        text: `episode ended: ${reason}; the query will be re-issued`,
      };
    }
  }

  /** One 20 Hz tick: sends the current joystick action iff an episode is
   * active and the previous state reply has arrived (lockstep). */
  tick(action: [number, number]): void {
    if (this.phase !== "driving" || this.query === null || this.awaitingState) {
      return;
    }
    const vx = clamp(action[0]);
    const vy = clamp(action[1]);
    this.awaitingState = true;
    this.socket.send(actionFrame(this.query.query_id, this.nextT, vx, vy));
  }

  abort(): void {
    if (this.phase === "driving" && this.query !== null) {
      this.socket.send(abortFrame(this.query.query_id));
      this.phase = "waiting";
      this.query = null;
      this.banner = { kind: "info", text: "episode aborted" };
      if (this.queryStartedAt !== null) {
        this.humanSeconds += this.now() - this.queryStartedAt;
        this.queryStartedAt = null;
      }
    }
  }
}
