// World (y up) to canvas (y down) coordinates, uniform scale.

export interface View {
  xmin: number;
  ymin: number;
  xmax: number;
  ymax: number;
  scale: number; // pixels per world unit
}

export function makeView(
  bounds: [number, number, number, number],
  scale = 20,
): View {
  const [xmin, ymin, xmax, ymax] = bounds;
  return { xmin, ymin, xmax, ymax, scale };
}

export function viewSize(view: View): [number, number] {
  return [
    (view.xmax - view.xmin) * view.scale,
    (view.ymax - view.ymin) * view.scale,
  ];
}

export function worldToScreen(view: View, x: number, y: number): [number, number] {
  return [(x - view.xmin) * view.scale, (view.ymax - y) * view.scale];
}

export function screenToWorld(view: View, sx: number, sy: number): [number, number] {
  return [sx / view.scale + view.xmin, view.ymax - sy / view.scale];
}
