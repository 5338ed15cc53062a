// Canvas drawing: map geometry, regions, goal disc, live agent and trail.

import { MapDoc, QueryMsg, RegionDoc } from "./protocol.js";
import { View, viewSize, worldToScreen } from "./transform.js";

const COLORS = {
  background: "#fafafa",
  boundary: "#333",
  obstacle: "#5b6770",
  start: "rgba(46, 134, 222, 0.25)",
  goalRegion: "rgba(34, 166, 91, 0.2)",
  goalDisc: "rgba(34, 166, 91, 0.55)",
  queryStart: "#e67e22",
  agent: "#c0392b",
  trail: "rgba(192, 57, 43, 0.45)",
};

function regionRect(region: RegionDoc): [number, number, number, number] {
  if (region.kind === "point") {
    return [region.x!, region.y!, region.x!, region.y!];
  }
  if (region.kind === "segment") {
    const lo = Math.min(region.x0!, region.x1!);
    const hi = Math.max(region.x0!, region.x1!);
    return [lo, region.y!, hi, region.y!];
  }
  return [region.xmin!, region.ymin!, region.xmax!, region.ymax!];
}

function fillWorldRect(
  ctx: CanvasRenderingContext2D,
  view: View,
  rect: [number, number, number, number],
  pad = 0,
): void {
  const [x0, y0] = worldToScreen(view, rect[0] - pad, rect[3] + pad);
  const [x1, y1] = worldToScreen(view, rect[2] + pad, rect[1] - pad);
  ctx.fillRect(x0, y0, Math.max(2, x1 - x0), Math.max(2, y1 - y0));
}

export function drawMap(
  ctx: CanvasRenderingContext2D,
  view: View,
  map: MapDoc,
): void {
  const [w, h] = viewSize(view);
  ctx.fillStyle = COLORS.background;
  ctx.fillRect(0, 0, w, h);
  ctx.strokeStyle = COLORS.boundary;
  ctx.lineWidth = 2;
  ctx.strokeRect(1, 1, w - 2, h - 2);

  ctx.fillStyle = COLORS.start;
  fillWorldRect(ctx, view, regionRect(map.start), 0.1);
  ctx.fillStyle = COLORS.goalRegion;
  fillWorldRect(ctx, view, regionRect(map.goal), 0.1);

  ctx.fillStyle = COLORS.obstacle;
  for (const rect of map.obstacles) {
    fillWorldRect(ctx, view, rect);
  }
}

export function drawEpisode(
  ctx: CanvasRenderingContext2D,
  view: View,
  query: QueryMsg | null,
  pos: [number, number] | null,
  trail: [number, number][],
  goalRadius: number,
): void {
  if (query !== null) {
    const [gx, gy] = worldToScreen(view, query.goal[0], query.goal[1]);
    ctx.fillStyle = COLORS.goalDisc;
    ctx.beginPath();
    ctx.arc(gx, gy, goalRadius * view.scale, 0, 2 * Math.PI);
    ctx.fill();

    const [qx, qy] = worldToScreen(view, query.start[0], query.start[1]);
    ctx.strokeStyle = COLORS.queryStart;
    ctx.lineWidth = 2;
    ctx.beginPath();
    ctx.arc(qx, qy, 0.4 * view.scale, 0, 2 * Math.PI);
    ctx.stroke();
  }

  if (trail.length > 1) {
    ctx.strokeStyle = COLORS.trail;
    ctx.lineWidth = 2;
    ctx.beginPath();
    const [sx, sy] = worldToScreen(view, trail[0][0], trail[0][1]);
    ctx.moveTo(sx, sy);
    for (const [x, y] of trail.slice(1)) {
      const [px, py] = worldToScreen(view, x, y);
      ctx.lineTo(px, py);
    }
    ctx.stroke();
  }

  if (pos !== null) {
    const [ax, ay] = worldToScreen(view, pos[0], pos[1]);
    ctx.fillStyle = COLORS.agent;
    ctx.beginPath();
    ctx.arc(ax, ay, 0.25 * view.scale, 0, 2 * Math.PI);
    ctx.fill();
  }
}
