// Pointer-as-sensor: normalised x/y become two-axis gesture frames, the
// desk-scale stand-in for a 2D accelerometer.

import { MarkerFramePayload } from "./protocol.js";

const MAX_RATE_HZ = 60;

export class PointerFeatureSource {
  private lastEmit = -Infinity;
  private readonly clock: () => number;

  constructor(clock: () => number = () => performance.now() / 1000) {
    this.clock = clock;
  }

  /** Clamp to [0,1] and rate-limit; null when inside the refractory gap. */
  frame(x: number, y: number): MarkerFramePayload | null {
    const now = this.clock();
    if (now - this.lastEmit < 1 / MAX_RATE_HZ) {
      return null;
    }
    this.lastEmit = now;
    const cx = Math.min(Math.max(x, 0), 1);
    const cy = Math.min(Math.max(y, 0), 1);
    return {
      t: now,
      kind: "marker",
      markers: [{ label: "pointer", p: [cx, cy, 0], mass: 1 }],
    };
  }
}
