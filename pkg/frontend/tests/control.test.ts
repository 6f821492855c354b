import { describe, expect, it } from "vitest";

import { mapPointerToControl, type PointerMode } from "../src/control.js";

const MODE: PointerMode = {
  rect: { left: 10, top: 20, width: 200, height: 100 },
  bounds: [
    { min: -1, max: 1 },
    { min: -2, max: 2 },
  ],
  axes: ["x", "y"],
};

describe("mapPointerToControl", () => {
  it("maps the widget center to the zero vector", () => {
    const u = mapPointerToControl({ x: 110, y: 70 }, MODE);
    expect(u[0]).toBeCloseTo(0, 12);
    expect(u[1]).toBeCloseTo(0, 12);
  });

  it("maps corners to the bound vector", () => {
    // top-right: x at max, y axis flipped so top means max
    expect(mapPointerToControl({ x: 210, y: 20 }, MODE)).toEqual([1, 2]);
    // bottom-left
    expect(mapPointerToControl({ x: 10, y: 120 }, MODE)).toEqual([-1, -2]);
  });

  it("is affine: midpoint of pointers maps to midpoint of controls", () => {
    const p1 = { x: 30, y: 40 };
    const p2 = { x: 170, y: 110 };
    const mid = { x: (p1.x + p2.x) / 2, y: (p1.y + p2.y) / 2 };
    const u1 = mapPointerToControl(p1, MODE);
    const u2 = mapPointerToControl(p2, MODE);
    const um = mapPointerToControl(mid, MODE);
    for (let i = 0; i < 2; i++) {
      expect(um[i]).toBeCloseTo((u1[i]! + u2[i]!) / 2, 12);
    }
  });

  it("clamps outside the widget", () => {
    expect(mapPointerToControl({ x: -500, y: 1e4 }, MODE)).toEqual([-1, -2]);
    expect(mapPointerToControl({ x: 5000, y: -5000 }, MODE)).toEqual([1, 2]);
  });

  it("supports a single vertical axis", () => {
    const mode: PointerMode = {
      rect: { left: 0, top: 0, width: 100, height: 100 },
      bounds: [{ min: -1, max: 1 }],
      axes: ["y"],
    };
    expect(mapPointerToControl({ x: 77, y: 0 }, mode)).toEqual([1]);
    expect(mapPointerToControl({ x: 3, y: 100 }, mode)).toEqual([-1]);
  });

  it("rejects mismatched axes/bounds", () => {
    expect(() =>
      mapPointerToControl({ x: 0, y: 0 }, { ...MODE, axes: ["x"] }),
    ).toThrowError();
  });
});
