/**
 * DOM wiring: canvas display with a translucent disocclusion-mask tint,
 * keyboard fly/orbit controls, a dolly-zoom slider, keyframe capture, and
 * trajectory export.  All protocol and state logic lives in the imported
 * modules; this file only connects them to browser APIs.
 */

import {
  defaultCamera,
  lookAt,
  moveLocal,
  orbitAround,
  rotateInPlace,
  setZoom,
  type CameraState,
  type Vec3,
} from "./camera.js";
import { KeyframeRecorder } from "./keyframes.js";
import type { FrameMessage } from "./protocol.js";
import { ViewerSession, type SessionStatus, type SocketLike } from "./session.js";

const MOVE_STEP = 0.05;
const TURN_STEP = Math.PI / 96;
const ORBIT_TARGET: Vec3 = [0, 0, 3];

interface ViewerElements {
  canvas: HTMLCanvasElement;
  status: HTMLElement;
  serverInput: HTMLInputElement;
  connectButton: HTMLButtonElement;
  maskToggle: HTMLInputElement;
  zoomSlider: HTMLInputElement;
  keyframeButton: HTMLButtonElement;
  exportButton: HTMLButtonElement;
  keyframeCount: HTMLElement;
}

function requireElement<T extends Element>(root: Document, id: string): T {
  const el = root.getElementById(id);
  if (!el) throw new Error(`missing #${id}`);
  return el as unknown as T;
}

/** Bridge a browser WebSocket to the injected-transport interface. */
function adaptWebSocket(socket: WebSocket): SocketLike {
  socket.binaryType = "arraybuffer";
  const adapter: SocketLike = {
    send: (data) => socket.send(data),
    close: () => socket.close(),
    onopen: null,
    onmessage: null,
    onclose: null,
    onerror: null,
  };
  socket.onopen = () => adapter.onopen?.();
  socket.onmessage = (event) => adapter.onmessage?.({ data: event.data as string | ArrayBuffer });
  socket.onclose = () => adapter.onclose?.();
  socket.onerror = () => adapter.onerror?.();
  return adapter;
}

export class Viewer {
  private camera: CameraState;
  private readonly recorder = new KeyframeRecorder();
  private session: ViewerSession | null = null;
  private readonly elements: ViewerElements;
  private lastFrame: FrameMessage | null = null;
  private orbitMode = false;

  constructor(root: Document) {
    this.elements = {
      canvas: requireElement(root, "frame"),
      status: requireElement(root, "status"),
      serverInput: requireElement(root, "server"),
      connectButton: requireElement(root, "connect"),
      maskToggle: requireElement(root, "mask-toggle"),
      zoomSlider: requireElement(root, "zoom"),
      keyframeButton: requireElement(root, "keyframe"),
      exportButton: requireElement(root, "export"),
      keyframeCount: requireElement(root, "keyframe-count"),
    };
    this.camera = lookAt(
      defaultCamera(
        this.elements.canvas.width,
        this.elements.canvas.height,
        Number(this.elements.zoomSlider.value) || 110,
      ),
      [0, 0, 0],
      ORBIT_TARGET,
    );
    this.bind(root);
    this.refreshControls();
  }

  private bind(root: Document): void {
    this.elements.connectButton.addEventListener("click", () => void this.connect());
    this.elements.maskToggle.addEventListener("change", () => void this.draw());
    this.elements.zoomSlider.addEventListener("input", () => {
      this.camera = setZoom(this.camera, Number(this.elements.zoomSlider.value));
      this.push();
    });
    this.elements.keyframeButton.addEventListener("click", () => {
      this.recorder.add(this.camera, Date.now());
      this.refreshControls();
    });
    this.elements.exportButton.addEventListener("click", () => this.download());
    root.addEventListener("keydown", (event) => this.onKey(event));
  }

  private async connect(): Promise<void> {
    this.session?.close();
    this.session = new ViewerSession({
      baseUrl: this.elements.serverInput.value.replace(/\/$/, ""),
      post: async (url) => {
        const response = await fetch(url, { method: "POST" });
        return { ok: response.ok, body: await response.text() };
      },
      openSocket: (url) => adaptWebSocket(new WebSocket(url)),
      onFrame: (frame) => {
        this.lastFrame = frame;
        void this.draw();
      },
      onStatus: (status, detail) => this.showStatus(status, detail),
      onServerError: (error) => {
        if (error.reason !== "stale_sequence") {
          this.showStatus(this.session?.status ?? "error", error.reason);
        }
      },
    });
    await this.session.connect(this.camera);
  }

  private onKey(event: KeyboardEvent): void {
    const step = event.shiftKey ? MOVE_STEP * 4 : MOVE_STEP;
    switch (event.key) {
      case "w": this.camera = moveLocal(this.camera, [0, 0, step]); break;
      case "s": this.camera = moveLocal(this.camera, [0, 0, -step]); break;
      case "a": this.camera = moveLocal(this.camera, [-step, 0, 0]); break;
      case "d": this.camera = moveLocal(this.camera, [step, 0, 0]); break;
      case "q": this.camera = moveLocal(this.camera, [0, -step, 0]); break;
      case "e": this.camera = moveLocal(this.camera, [0, step, 0]); break;
      case "o": this.orbitMode = !this.orbitMode; return;
      case "ArrowLeft":
        this.camera = this.orbitMode
          ? orbitAround(this.camera, ORBIT_TARGET, -TURN_STEP * 2, 0)
          : rotateInPlace(this.camera, -TURN_STEP, 0);
        break;
      case "ArrowRight":
        this.camera = this.orbitMode
          ? orbitAround(this.camera, ORBIT_TARGET, TURN_STEP * 2, 0)
          : rotateInPlace(this.camera, TURN_STEP, 0);
        break;
      case "ArrowUp":
        this.camera = this.orbitMode
          ? orbitAround(this.camera, ORBIT_TARGET, 0, -TURN_STEP * 2)
          : rotateInPlace(this.camera, 0, -TURN_STEP);
        break;
      case "ArrowDown":
        this.camera = this.orbitMode
          ? orbitAround(this.camera, ORBIT_TARGET, 0, TURN_STEP * 2)
          : rotateInPlace(this.camera, 0, TURN_STEP);
        break;
      default:
        return;
    }
    event.preventDefault();
    this.push();
  }

  /** Send the current pose; display catches up via the frame stream. */
  private push(): void {
    this.session?.sendPose(this.camera);
  }

  private async draw(): Promise<void> {
    const frame = this.lastFrame;
    if (!frame) return;
    const context = this.elements.canvas.getContext("2d");
    if (!context) return;
    const image = await createImageBitmap(new Blob([frame.imagePng.slice()], { type: "image/png" }));
    context.clearRect(0, 0, this.elements.canvas.width, this.elements.canvas.height);
    context.drawImage(image, 0, 0);
    if (this.elements.maskToggle.checked) {
      // Tint the *uncovered* pixels: the mask PNG is white where the splat
      // landed, so invert it into a translucent magenta wash.
      const mask = await createImageBitmap(new Blob([frame.maskPng.slice()], { type: "image/png" }));
      const scratch = document.createElement("canvas");
      scratch.width = mask.width;
      scratch.height = mask.height;
      const sctx = scratch.getContext("2d");
      if (!sctx) return;
      sctx.drawImage(mask, 0, 0);
      sctx.globalCompositeOperation = "difference";
      sctx.fillStyle = "#ffffff";
      sctx.fillRect(0, 0, scratch.width, scratch.height);
      context.globalAlpha = 0.45;
      context.globalCompositeOperation = "screen";
      sctx.globalCompositeOperation = "multiply";
      sctx.fillStyle = "#ff00aa";
      sctx.fillRect(0, 0, scratch.width, scratch.height);
      context.drawImage(scratch, 0, 0);
      context.globalAlpha = 1;
      context.globalCompositeOperation = "source-over";
    }
  }

  private download(): void {
    if (!this.recorder.canExport) return;
    const blob = new Blob([this.recorder.exportJson()], { type: "application/json" });
    const anchor = document.createElement("a");
    anchor.href = URL.createObjectURL(blob);
    anchor.download = "trajectory.json";
    anchor.click();
    URL.revokeObjectURL(anchor.href);
  }

  private refreshControls(): void {
    this.elements.exportButton.disabled = !this.recorder.canExport;
    this.elements.keyframeCount.textContent = String(this.recorder.count);
  }

  private showStatus(status: SessionStatus, detail?: string): void {
    this.elements.status.textContent = detail ? `${status}: ${detail}` : status;
    this.elements.status.dataset["state"] = status;
  }
}

export function mount(root: Document = document): Viewer {
  return new Viewer(root);
}
