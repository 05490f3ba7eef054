/**
 * Camera state and control math.
 *
 * The camera mirrors the trajectory-file frame schema exactly: pinhole
 * intrinsics plus a world-to-camera rotation (row-major 3x3) and
 * translation, so a state serializes into a pose message or a trajectory
 * frame without conversion.  All controls are pure functions returning a
 * new state; the rotation stays orthonormal because every update composes
 * rotations or rebuilds the matrix from a look-at frame.
 */

export type Vec3 = [number, number, number];

/** Row-major 3x3 matrix as 9 numbers, matching the wire schema. */
export type Mat3 = [
  number, number, number,
  number, number, number,
  number, number, number,
];

export interface CameraState {
  readonly width: number;
  readonly height: number;
  readonly fx: number;
  readonly fy: number;
  readonly cx: number;
  readonly cy: number;
  /** World-to-camera rotation, row major. */
  readonly rotation: Mat3;
  /** World-to-camera translation: x_cam = R x_world + t. */
  readonly translation: Vec3;
}

export const IDENTITY: Mat3 = [1, 0, 0, 0, 1, 0, 0, 0, 1];

export function matMul(a: Mat3, b: Mat3): Mat3 {
  const out = new Array<number>(9);
  for (let row = 0; row < 3; row++) {
    for (let col = 0; col < 3; col++) {
      out[row * 3 + col] =
        a[row * 3]! * b[col]! +
        a[row * 3 + 1]! * b[3 + col]! +
        a[row * 3 + 2]! * b[6 + col]!;
    }
  }
  return out as Mat3;
}

export function matTranspose(m: Mat3): Mat3 {
  return [m[0], m[3], m[6], m[1], m[4], m[7], m[2], m[5], m[8]];
}

export function matApply(m: Mat3, v: Vec3): Vec3 {
  return [
    m[0] * v[0] + m[1] * v[1] + m[2] * v[2],
    m[3] * v[0] + m[4] * v[1] + m[5] * v[2],
    m[6] * v[0] + m[7] * v[1] + m[8] * v[2],
  ];
}

function cross(a: Vec3, b: Vec3): Vec3 {
  return [
    a[1] * b[2] - a[2] * b[1],
    a[2] * b[0] - a[0] * b[2],
    a[0] * b[1] - a[1] * b[0],
  ];
}

function norm(v: Vec3): number {
  return Math.hypot(v[0], v[1], v[2]);
}

function normalize(v: Vec3): Vec3 {
  const n = norm(v);
  if (n === 0) throw new Error("cannot normalize a zero vector");
  return [v[0] / n, v[1] / n, v[2] / n];
}

function sub(a: Vec3, b: Vec3): Vec3 {
  return [a[0] - b[0], a[1] - b[1], a[2] - b[2]];
}

function add(a: Vec3, b: Vec3): Vec3 {
  return [a[0] + b[0], a[1] + b[1], a[2] + b[2]];
}

function scale(v: Vec3, s: number): Vec3 {
  return [v[0] * s, v[1] * s, v[2] * s];
}

function rotationX(angle: number): Mat3 {
  const c = Math.cos(angle);
  const s = Math.sin(angle);
  return [1, 0, 0, 0, c, -s, 0, s, c];
}

function rotationY(angle: number): Mat3 {
  const c = Math.cos(angle);
  const s = Math.sin(angle);
  return [c, 0, s, 0, 1, 0, -s, 0, c];
}

/** Camera center in world coordinates: c = -R^T t. */
export function cameraCenter(camera: CameraState): Vec3 {
  const back = matApply(matTranspose(camera.rotation), camera.translation);
  return [-back[0], -back[1], -back[2]];
}

/**
 * Replace IEEE -0 entries with +0.  JSON cannot carry a negative zero, so
 * canonical state makes serialize-then-parse an exact identity; every
 * other value is preserved bit for bit (x + 0 === x).
 */
function canonical<T extends number[]>(values: T): T {
  return values.map((v) => v + 0) as T;
}

function withPose(camera: CameraState, rotation: Mat3, center: Vec3): CameraState {
  const t = matApply(rotation, center);
  return {
    ...camera,
    rotation: canonical(rotation),
    translation: canonical([-t[0], -t[1], -t[2]]),
  };
}

/** A camera at `center` looking toward `target`, +y-down image frame. */
export function lookAt(
  camera: CameraState,
  center: Vec3,
  target: Vec3,
  up: Vec3 = [0, 1, 0],
): CameraState {
  const zAxis = normalize(sub(target, center));
  const xAxis = normalize(cross(up, zAxis));
  const yAxis = cross(zAxis, xAxis);
  const rotation: Mat3 = [...xAxis, ...yAxis, ...zAxis] as Mat3;
  return withPose(camera, rotation, center);
}

export function defaultCamera(width = 96, height = 72, fx = 110): CameraState {
  return {
    width,
    height,
    fx,
    fy: fx,
    cx: (width - 1) / 2,
    cy: (height - 1) / 2,
    rotation: IDENTITY,
    translation: [0, 0, 0],
  };
}

/**
 * Fly: translate along the camera's own axes (x right, y down, z forward).
 */
export function moveLocal(camera: CameraState, delta: Vec3): CameraState {
  const worldDelta = matApply(matTranspose(camera.rotation), delta);
  return withPose(camera, camera.rotation, add(cameraCenter(camera), worldDelta));
}

/**
 * Fly: turn in place.  Yaw spins about the camera's y axis, pitch about
 * its x axis; the center stays fixed.
 */
export function rotateInPlace(
  camera: CameraState,
  yaw: number,
  pitch: number,
): CameraState {
  const turned = matMul(rotationX(pitch), matMul(rotationY(yaw), camera.rotation));
  return withPose(camera, turned, cameraCenter(camera));
}

/**
 * Orbit: revolve the camera center around `target` (yaw about the world
 * y axis, pitch about the camera's x axis) and keep looking at it.
 */
export function orbitAround(
  camera: CameraState,
  target: Vec3,
  yaw: number,
  pitch: number,
): CameraState {
  let offset = sub(cameraCenter(camera), target);
  offset = matApply(rotationY(yaw), offset);
  const pitchAxis = matTranspose(camera.rotation);
  const xAxis: Vec3 = [pitchAxis[0], pitchAxis[3], pitchAxis[6]];
  offset = rotateAboutAxis(offset, xAxis, pitch);
  return lookAt(camera, add(target, offset), target);
}

function rotateAboutAxis(v: Vec3, axis: Vec3, angle: number): Vec3 {
  const k = normalize(axis);
  const c = Math.cos(angle);
  const s = Math.sin(angle);
  const kxv = cross(k, v);
  const dot = k[0] * v[0] + k[1] * v[1] + k[2] * v[2];
  return add(add(scale(v, c), scale(kxv, s)), scale(k, dot * (1 - c)));
}

/**
 * Dolly-zoom slider: scale the focal lengths.  Combine with moveLocal for
 * the classic dolly-zoom (both land in the same pose message).
 */
export function setZoom(camera: CameraState, fx: number, fy = fx): CameraState {
  if (!(fx > 0) || !(fy > 0)) throw new Error("focal length must be positive");
  return { ...camera, fx, fy };
}

/** Largest absolute deviation of R R^T from the identity. */
export function orthonormalityError(rotation: Mat3): number {
  const gram = matMul(rotation, matTranspose(rotation));
  let worst = 0;
  for (let i = 0; i < 9; i++) {
    const expect = i % 4 === 0 ? 1 : 0;
    worst = Math.max(worst, Math.abs(gram[i]! - expect));
  }
  return worst;
}
