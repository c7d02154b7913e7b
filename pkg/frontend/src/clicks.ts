/** Eye-click capture state: up to two points in display coordinates.
 *
 * The first click is the subject's right eye, the second the subject's
 * left eye.  Points are stored in display pixels and divided by the
 * display scale only at submission time, so undo/redo never accumulates
 * rounding error.
 */

export interface Point {
  x: number;
  y: number;
}

export interface ClickState {
  /** Captured clicks in display pixels, oldest first. */
  readonly points: readonly Point[];
  /** Display pixels per original-image pixel. */
  readonly scale: number;
}

export function emptyState(scale: number): ClickState {
  if (!Number.isFinite(scale) || scale <= 0) {
    throw new RangeError(`display scale must be a positive number, got ${scale}`);
  }
  return { points: [], scale };
}

/** Add a click.  Ignored once two points are captured — undo or reset first,
 * so the state can never hold more than two points. */
export function addClick(state: ClickState, p: Point): ClickState {
  if (state.points.length >= 2) {
    return state;
  }
  return { ...state, points: [...state.points, { x: p.x, y: p.y }] };
}

/** Drop the newest click, if any. */
export function undo(state: ClickState): ClickState {
  return { ...state, points: state.points.slice(0, -1) };
}

export function reset(state: ClickState): ClickState {
  return { ...state, points: [] };
}

/** Submission needs exactly two distinct points. */
export function canSubmit(state: ClickState): boolean {
  if (state.points.length !== 2) {
    return false;
  }
  const [a, b] = state.points;
  return a!.x !== b!.x || a!.y !== b!.y;
}

/** Convert the captured clicks to original-image coordinates.
 *
 * First click = subject's right eye, second = subject's left eye; the
 * server re-orders defensively, so a swapped pair still processes.
 */
export function toOriginal(state: ClickState): { right: Point; left: Point } {
  if (!canSubmit(state)) {
    throw new Error(`need two distinct clicks, have ${state.points.length}`);
  }
  const [first, second] = state.points;
  return {
    right: { x: first!.x / state.scale, y: first!.y / state.scale },
    left: { x: second!.x / state.scale, y: second!.y / state.scale },
  };
}

/** Largest uniform scale that fits an image inside a viewport.
 *
 * Upscaling small images is deliberate: clicks land on integer screen
 * pixels, so zooming in is what buys sub-pixel precision in the
 * original frame.
 */
export function fitScale(
  imageW: number,
  imageH: number,
  viewW: number,
  viewH: number,
): number {
  if (imageW <= 0 || imageH <= 0) {
    throw new RangeError(`image dimensions must be positive, got ${imageW}x${imageH}`);
  }
  if (viewW <= 0 || viewH <= 0) {
    throw new RangeError(`viewport dimensions must be positive, got ${viewW}x${viewH}`);
  }
  return Math.min(viewW / imageW, viewH / imageH);
}
