/**
 * Pointer-to-control mapping: an affine map from a widget rectangle onto the
 * player's intended-control box, clamped at the bounds.
 */

export interface PointerMode {
  /** Widget rectangle in screen coordinates. */
  rect: { left: number; top: number; width: number; height: number };
  /** Per-axis control bounds; the widget center maps to the box center. */
  bounds: Array<{ min: number; max: number }>;
  /**
   * Which pointer axis feeds each control component ("x" | "y").
   * Screen y grows downward; "y" components are flipped so up means more.
   */
  axes: Array<"x" | "y">;
}

export function mapPointerToControl(
  pointer: { x: number; y: number },
  mode: PointerMode,
): number[] {
  if (mode.bounds.length !== mode.axes.length) {
    throw new Error("bounds/axes length mismatch");
  }
  const { rect } = mode;
  if (rect.width <= 0 || rect.height <= 0) throw new Error("degenerate widget rect");
  const fx = (pointer.x - rect.left) / rect.width;
  const fy = (pointer.y - rect.top) / rect.height;
  return mode.axes.map((axis, i) => {
    const bound = mode.bounds[i]!;
    const fraction = axis === "x" ? fx : 1.0 - fy;
    const value = bound.min + (bound.max - bound.min) * fraction;
    return Math.min(bound.max, Math.max(bound.min, value));
  });
}
