/**
 * Wire protocol for the pose-streaming server.
 *
 * Outgoing: JSON text pose messages.  Incoming: either JSON text (error
 * notices) or one binary frame per accepted pose:
 *
 *     u32le seq | u32le image_bytes | u32le mask_bytes | image PNG | mask PNG
 *
 * The `frame` object inside a pose message uses exactly the
 * trajectory-file frame schema, so recorded keyframes and streamed poses
 * serialize identically.
 */

import type { CameraState } from "./camera.js";

export interface PoseFrame {
  fx: number;
  fy: number;
  cx: number;
  cy: number;
  rotation: number[];
  translation: number[];
}

export interface PoseMessage {
  seq: number;
  width: number;
  height: number;
  frame: PoseFrame;
}

export function poseFrame(camera: CameraState): PoseFrame {
  return {
    fx: camera.fx,
    fy: camera.fy,
    cx: camera.cx,
    cy: camera.cy,
    rotation: [...camera.rotation],
    translation: [...camera.translation],
  };
}

export function encodePoseMessage(seq: number, camera: CameraState): string {
  if (!Number.isInteger(seq) || seq <= 0) {
    throw new Error(`sequence number must be a positive integer, got ${seq}`);
  }
  const message: PoseMessage = {
    seq,
    width: camera.width,
    height: camera.height,
    frame: poseFrame(camera),
  };
  return JSON.stringify(message);
}

export interface FrameMessage {
  seq: number;
  imagePng: Uint8Array;
  maskPng: Uint8Array;
}

const HEADER_BYTES = 12;

/** Decode one binary frame; throws if the lengths do not add up. */
export function decodeFrameMessage(data: ArrayBuffer): FrameMessage {
  if (data.byteLength < HEADER_BYTES) {
    throw new Error(`frame too short: ${data.byteLength} bytes`);
  }
  const view = new DataView(data);
  const seq = view.getUint32(0, true);
  const imageBytes = view.getUint32(4, true);
  const maskBytes = view.getUint32(8, true);
  if (data.byteLength !== HEADER_BYTES + imageBytes + maskBytes) {
    throw new Error(
      `frame length mismatch: header says ${HEADER_BYTES + imageBytes + maskBytes}, ` +
      `got ${data.byteLength}`,
    );
  }
  return {
    seq,
    imagePng: new Uint8Array(data, HEADER_BYTES, imageBytes),
    maskPng: new Uint8Array(data, HEADER_BYTES + imageBytes, maskBytes),
  };
}

export type ServerErrorReason =
  | "stale_sequence"
  | "size_mismatch"
  | "bad_message"
  | "read_only";

export interface ServerError {
  type: "error";
  reason: ServerErrorReason;
  current?: number;
}

/** Parse a JSON text message from the server; null if unrecognizable. */
export function parseServerText(text: string): ServerError | null {
  let doc: unknown;
  try {
    doc = JSON.parse(text);
  } catch {
    return null;
  }
  if (typeof doc !== "object" || doc === null) return null;
  const record = doc as Record<string, unknown>;
  if (record["type"] !== "error" || typeof record["reason"] !== "string") {
    return null;
  }
  const error: ServerError = {
    type: "error",
    reason: record["reason"] as ServerErrorReason,
  };
  if (typeof record["current"] === "number") error.current = record["current"];
  return error;
}
