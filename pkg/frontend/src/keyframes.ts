/**
 * Keyframe recording and trajectory export.
 *
 * Exported documents use the trajectory-file schema consumed by the
 * offline tools: `{"width", "height", "frames": [{fx, fy, cx, cy,
 * rotation[9], translation[3]}]}`.  All keyframes share one image size —
 * the trajectory format has a single width/height — so mixed sizes are
 * rejected at capture time.
 */

import type { CameraState } from "./camera.js";
import { poseFrame, type PoseFrame } from "./protocol.js";

export interface Keyframe {
  camera: CameraState;
  /** Capture time in milliseconds; keyframes stay ordered by this. */
  capturedAt: number;
}

export interface TrajectoryDocument {
  width: number;
  height: number;
  frames: PoseFrame[];
}

export class KeyframeRecorder {
  private keyframes: Keyframe[] = [];

  get count(): number {
    return this.keyframes.length;
  }

  /** Export is only meaningful with at least one keyframe recorded. */
  get canExport(): boolean {
    return this.keyframes.length > 0;
  }

  list(): readonly Keyframe[] {
    return this.keyframes;
  }

  /** Record a pose; insertion keeps the list ordered by capture time. */
  add(camera: CameraState, capturedAt: number): void {
    const first = this.keyframes[0];
    if (first && (camera.width !== first.camera.width || camera.height !== first.camera.height)) {
      throw new Error(
        `keyframe size ${camera.width}x${camera.height} differs from ` +
        `${first.camera.width}x${first.camera.height}`,
      );
    }
    const keyframe: Keyframe = { camera, capturedAt };
    let at = this.keyframes.length;
    while (at > 0 && this.keyframes[at - 1]!.capturedAt > capturedAt) at--;
    this.keyframes.splice(at, 0, keyframe);
  }

  removeLast(): void {
    this.keyframes.pop();
  }

  clear(): void {
    this.keyframes = [];
  }

  toDocument(): TrajectoryDocument {
    const first = this.keyframes[0];
    if (!first) throw new Error("no keyframes recorded");
    return {
      width: first.camera.width,
      height: first.camera.height,
      frames: this.keyframes.map((kf) => poseFrame(kf.camera)),
    };
  }

  /** Trajectory JSON ready to save and replay offline. */
  exportJson(): string {
    return JSON.stringify(this.toDocument(), null, 2);
  }
}

/** Parse and validate a trajectory document (the loader's schema). */
export function parseTrajectory(text: string): TrajectoryDocument {
  const doc = JSON.parse(text) as Partial<TrajectoryDocument>;
  if (!Number.isInteger(doc.width) || !Number.isInteger(doc.height)) {
    throw new Error("trajectory must carry integer width and height");
  }
  if (!Array.isArray(doc.frames) || doc.frames.length === 0) {
    throw new Error("trajectory must carry at least one frame");
  }
  for (const frame of doc.frames) {
    for (const field of ["fx", "fy", "cx", "cy"] as const) {
      if (typeof frame[field] !== "number") {
        throw new Error(`frame missing numeric ${field}`);
      }
    }
    if (!Array.isArray(frame.rotation) || frame.rotation.length !== 9) {
      throw new Error("frame rotation must have 9 entries");
    }
    if (!Array.isArray(frame.translation) || frame.translation.length !== 3) {
      throw new Error("frame translation must have 3 entries");
    }
  }
  return doc as TrajectoryDocument;
}
