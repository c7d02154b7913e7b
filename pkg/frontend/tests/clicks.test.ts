import { describe, expect, test } from "vitest";

import {
  addClick,
  canSubmit,
  emptyState,
  fitScale,
  reset,
  toOriginal,
  undo,
} from "../src/clicks.js";

describe("click state machine", () => {
  test("starts empty and cannot submit", () => {
    const s = emptyState(1.5);
    expect(s.points).toHaveLength(0);
    expect(s.scale).toBe(1.5);
    expect(canSubmit(s)).toBe(false);
  });

  test("rejects nonsensical scales", () => {
    for (const bad of [0, -1, NaN, Infinity]) {
      expect(() => emptyState(bad)).toThrow(RangeError);
    }
  });

  test("two distinct clicks enable submission", () => {
    let s = emptyState(1);
    s = addClick(s, { x: 10, y: 20 });
    expect(canSubmit(s)).toBe(false);
    s = addClick(s, { x: 30, y: 20 });
    expect(canSubmit(s)).toBe(true);
  });

  test("two coincident clicks cannot be submitted", () => {
    let s = emptyState(1);
    s = addClick(s, { x: 10, y: 20 });
    s = addClick(s, { x: 10, y: 20 });
    expect(s.points).toHaveLength(2);
    expect(canSubmit(s)).toBe(false);
    expect(() => toOriginal(s)).toThrow(/distinct/);
  });

  test("a third click is ignored, so never more than two points", () => {
    let s = emptyState(1);
    s = addClick(s, { x: 1, y: 1 });
    s = addClick(s, { x: 2, y: 2 });
    const after = addClick(s, { x: 3, y: 3 });
    expect(after).toBe(s);
    expect(after.points).toHaveLength(2);
  });

  test("undo drops the newest point; on empty it is a no-op", () => {
    let s = emptyState(1);
    s = addClick(s, { x: 1, y: 1 });
    s = addClick(s, { x: 2, y: 2 });
    s = undo(s);
    expect(s.points).toEqual([{ x: 1, y: 1 }]);
    s = undo(s);
    s = undo(s);
    expect(s.points).toHaveLength(0);
  });

  test("reset clears everything but keeps the scale", () => {
    let s = emptyState(2.5);
    s = addClick(s, { x: 1, y: 1 });
    s = addClick(s, { x: 2, y: 2 });
    s = reset(s);
    expect(s.points).toHaveLength(0);
    expect(s.scale).toBe(2.5);
  });

  test("state updates never mutate their input", () => {
    const s0 = emptyState(1);
    const s1 = addClick(s0, { x: 5, y: 6 });
    expect(s0.points).toHaveLength(0);
    expect(s1.points).toHaveLength(1);
  });
});

describe("display-to-original conversion", () => {
  test("first click maps to the subject-right eye, second to the left", () => {
    let s = emptyState(2);
    s = addClick(s, { x: 100, y: 60 }); // display coords
    s = addClick(s, { x: 300, y: 64 });
    const { right, left } = toOriginal(s);
    expect(right).toEqual({ x: 50, y: 30 });
    expect(left).toEqual({ x: 150, y: 32 });
  });

  test("round trip through a non-unit zoom stays within 1 px", () => {
    // Simulates what a browser does: the displayed click position is an
    // integer pixel, the original coordinate is recovered by dividing by
    // the zoom.  At any zoom >= 0.5 the recovered point is within 1 px.
    let worst = 0;
    for (let i = 0; i < 500; i++) {
      const scale = 0.5 + ((i * 37) % 350) / 100; // 0.5 .. 3.99
      const truth = { x: (i * 7.13) % 320, y: (i * 3.71) % 240 };
      const display = { x: Math.round(truth.x * scale), y: Math.round(truth.y * scale) };
      let s = emptyState(scale);
      s = addClick(s, display);
      s = addClick(s, { x: display.x + 40, y: display.y });
      const { right } = toOriginal(s);
      worst = Math.max(worst, Math.abs(right.x - truth.x), Math.abs(right.y - truth.y));
    }
    expect(worst).toBeLessThanOrEqual(1);
  });

  test("conversion is exact when display coordinates are exact", () => {
    const scale = 1.6;
    const truth = { x: 132.875, y: 147.804 };
    let s = emptyState(scale);
    s = addClick(s, { x: truth.x * scale, y: truth.y * scale });
    s = addClick(s, { x: 0, y: 0 });
    const { right } = toOriginal(s);
    expect(right.x).toBeCloseTo(truth.x, 9);
    expect(right.y).toBeCloseTo(truth.y, 9);
  });
});

describe("fit-to-viewport scale", () => {
  test("limited by the tighter axis", () => {
    expect(fitScale(340, 400, 480, 480)).toBeCloseTo(1.2, 12);
    expect(fitScale(400, 340, 480, 480)).toBeCloseTo(1.2, 12);
    expect(fitScale(100, 100, 480, 240)).toBe(2.4);
  });

  test("upscales small images and downscales large ones", () => {
    expect(fitScale(60, 70, 600, 700)).toBe(10);
    expect(fitScale(6000, 7000, 600, 700)).toBeCloseTo(0.1, 12);
  });

  test("rejects degenerate dimensions", () => {
    expect(() => fitScale(0, 10, 100, 100)).toThrow(RangeError);
    expect(() => fitScale(10, 10, 100, 0)).toThrow(RangeError);
  });
});
