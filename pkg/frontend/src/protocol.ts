// Wire protocol "early/1": one JSON object per websocket text frame.

export const PROTOCOL_VERSION = "early/1";

export interface RegionDoc {
  kind: "point" | "segment" | "rect";
  x?: number;
  y?: number;
  x0?: number;
  x1?: number;
  xmin?: number;
  ymin?: number;
  xmax?: number;
  ymax?: number;
}

export interface MapDoc {
  name: string;
  bounds: [number, number, number, number];
  obstacles: [number, number, number, number][];
  start: RegionDoc;
  goal: RegionDoc;
  goal_radius: number;
  max_steps: number;
}

export interface HelloMsg {
  type: "hello";
  version: string;
  map: MapDoc;
  n_d: number | null;
}

export interface QueryMsg {
  type: "query";
  query_id: number;
  start: [number, number];
  goal: [number, number];
  t: 0;
  pos: [number, number];
}

export interface StateMsg {
  type: "state";
  query_id: number;
  t: number;
  pos: [number, number];
  reward: number;
  done: boolean;
  cause: "none" | "goal" | "collision" | "timeout";
}

export interface EpisodeEndMsg {
  type: "episode_end";
  query_id: number;
  cause: string;
  steps: number;
  accepted: boolean;
}

export interface ErrorMsg {
  type: "error";
  message: string;
}

export type ServerMsg = HelloMsg | QueryMsg | StateMsg | EpisodeEndMsg | ErrorMsg;

export function parseServerMsg(raw: string): ServerMsg {
  let doc: unknown;
  try {
    doc = JSON.parse(raw);
  } catch {
    throw new Error(`malformed frame: ${raw.slice(0, 80)}`);
  }
  if (typeof doc !== "object" || doc === null || !("type" in doc)) {
    throw new Error("frame is not a typed message");
  }
  const type = (doc as { type: string }).type;
  if (!["hello", "query", "state", "episode_end", "error"].includes(type)) {
    throw new Error(`unknown message type ${type}`);
  }
  return doc as ServerMsg;
}

export function readyFrame(): string {
  return JSON.stringify({ type: "ready", version: PROTOCOL_VERSION });
}

export function actionFrame(
  queryId: number,
  t: number,
  vx: number,
  vy: number,
): string {
  return JSON.stringify({ type: "action", query_id: queryId, t, vx, vy });
}

export function abortFrame(queryId: number): string {
  return JSON.stringify({ type: "abort", query_id: queryId });
}
