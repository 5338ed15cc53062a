// Keyboard and pointer input to joystick axes. Keyboard gives bang-bang
// axes (diagonals allowed); a pointer drag gives proportional control
// normalized to the unit disc. World y points up, screen y points down.

export type KeyStates = Record<string, boolean>;

const UP = ["ArrowUp", "KeyW"];
const DOWN = ["ArrowDown", "KeyS"];
const LEFT = ["ArrowLeft", "KeyA"];
const RIGHT = ["ArrowRight", "KeyD"];

function anyDown(keys: KeyStates, codes: string[]): boolean {
  return codes.some((c) => keys[c]);
}

export function keysToAction(keys: KeyStates): [number, number] {
  let vx = 0;
  let vy = 0;
  if (anyDown(keys, RIGHT)) vx += 1;
  if (anyDown(keys, LEFT)) vx -= 1;
  if (anyDown(keys, UP)) vy += 1;
  if (anyDown(keys, DOWN)) vy -= 1;
  return [vx, vy];
}

export function dragToAction(
  dxPixels: number,
  dyPixels: number,
  radiusPixels: number,
): [number, number] {
  // screen-down drag means world-down velocity: flip y
  let vx = dxPixels / radiusPixels;
  let vy = -dyPixels / radiusPixels;
  const mag = Math.hypot(vx, vy);
  if (mag > 1) {
    vx /= mag;
    vy /= mag;
  }
  return [clamp(vx), clamp(vy)];
}

export function clamp(v: number): number {
  if (v === 0) return 0; // fold -0
  return v < -1 ? -1 : v > 1 ? 1 : v;
}
