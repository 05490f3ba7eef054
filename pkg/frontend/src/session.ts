/**
 * Live session against the pose-streaming server.
 *
 * One HTTP call creates the session, one websocket streams poses out and
 * frames back.  Display follows a last-writer-wins rule ordered by
 * sequence number: a frame is shown only if its sequence number exceeds
 * that of the frame currently shown, so the image on screen always
 * corresponds to the highest acknowledged pose and stale frames are
 * dropped silently.  Transports are injected, which keeps the state
 * machine testable without a browser or a server.
 */

import type { CameraState } from "./camera.js";
import {
  decodeFrameMessage,
  encodePoseMessage,
  parseServerText,
  type FrameMessage,
  type ServerError,
} from "./protocol.js";

export interface SocketLike {
  send(data: string): void;
  close(): void;
  onopen: (() => void) | null;
  onmessage: ((event: { data: string | ArrayBuffer }) => void) | null;
  onclose: (() => void) | null;
  onerror: (() => void) | null;
}

export type SocketFactory = (url: string) => SocketLike;

/** Minimal POST: resolve with the response body, reject on network error. */
export type HttpPost = (url: string) => Promise<{ ok: boolean; body: string }>;

export type SessionStatus =
  | "idle"
  | "connecting"
  | "connected"
  | "read_only"
  | "disconnected"
  | "error";

export interface SessionOptions {
  baseUrl: string;
  post: HttpPost;
  openSocket: SocketFactory;
  onFrame?: (frame: FrameMessage) => void;
  onStatus?: (status: SessionStatus, detail?: string) => void;
  onServerError?: (error: ServerError) => void;
}

function websocketUrl(baseUrl: string, sessionId: string): string {
  const ws = baseUrl.replace(/^http/, "ws").replace(/\/$/, "");
  return `${ws}/session/${sessionId}/stream`;
}

export class ViewerSession {
  private readonly options: SessionOptions;
  private socket: SocketLike | null = null;
  private statusValue: SessionStatus = "idle";
  private sessionIdValue: string | null = null;
  private lastSentSeq = 0;
  private displayedSeqValue = 0;
  private staleDropsValue = 0;
  private closing = false;

  constructor(options: SessionOptions) {
    this.options = options;
  }

  get status(): SessionStatus {
    return this.statusValue;
  }

  get sessionId(): string | null {
    return this.sessionIdValue;
  }

  /** Sequence number of the frame currently on display (0 = none). */
  get displayedSeq(): number {
    return this.displayedSeqValue;
  }

  /** Sequence number of the last pose sent. */
  get sentSeq(): number {
    return this.lastSentSeq;
  }

  /** Frames discarded because a newer one was already displayed. */
  get staleDrops(): number {
    return this.staleDropsValue;
  }

  /**
   * Create a server session and open its stream.  The initial pose goes
   * out as soon as the socket opens, so the first frame arrives within
   * one round trip.  A reconnect starts a fresh session: sequence
   * numbers restart along with it.
   */
  async connect(initialPose: CameraState): Promise<void> {
    this.closing = false;
    this.setStatus("connecting");
    let body: string;
    try {
      const response = await this.options.post(`${this.options.baseUrl}/session`);
      if (!response.ok) throw new Error(`session create failed: ${response.body}`);
      body = response.body;
    } catch (error) {
      this.setStatus("error", String(error));
      return;
    }
    const id = (JSON.parse(body) as { id?: unknown }).id;
    if (typeof id !== "string" || id.length === 0) {
      this.setStatus("error", "malformed session response");
      return;
    }
    this.sessionIdValue = id;
    this.lastSentSeq = 0;
    this.displayedSeqValue = 0;

    const socket = this.options.openSocket(websocketUrl(this.options.baseUrl, id));
    this.socket = socket;
    socket.onopen = () => {
      this.setStatus("connected");
      this.sendPose(initialPose);
    };
    socket.onmessage = (event) => this.handleMessage(event.data);
    socket.onerror = () => {
      if (!this.closing) this.setStatus("error", "stream error");
    };
    socket.onclose = () => {
      this.socket = null;
      if (!this.closing) this.setStatus("disconnected");
    };
  }

  /** Tear down without flagging an error (no reconnect intent). */
  close(): void {
    this.closing = true;
    this.socket?.close();
    this.socket = null;
    this.setStatus("idle");
  }

  /**
   * Queue one pose.  Sequence numbers increase monotonically for the
   * lifetime of the session; while not connected this is a silent no-op
   * (steering drops, state converges when the stream returns).
   */
  sendPose(camera: CameraState): number | null {
    if (!this.socket || (this.statusValue !== "connected" && this.statusValue !== "read_only")) {
      return null;
    }
    const seq = ++this.lastSentSeq;
    this.socket.send(encodePoseMessage(seq, camera));
    return seq;
  }

  private handleMessage(data: string | ArrayBuffer): void {
    if (typeof data === "string") {
      const error = parseServerText(data);
      if (!error) return;
      if (error.reason === "stale_sequence" && typeof error.current === "number") {
        // Another writer (or an earlier life of this one) is ahead of us;
        // jump past it so the next pose is accepted.
        this.lastSentSeq = Math.max(this.lastSentSeq, error.current);
      } else if (error.reason === "read_only") {
        this.setStatus("read_only");
      }
      this.options.onServerError?.(error);
      return;
    }
    const frame = decodeFrameMessage(data);
    if (frame.seq <= this.displayedSeqValue) {
      this.staleDropsValue += 1;
      return;
    }
    this.displayedSeqValue = frame.seq;
    this.options.onFrame?.(frame);
  }

  private setStatus(status: SessionStatus, detail?: string): void {
    this.statusValue = status;
    this.options.onStatus?.(status, detail);
  }
}
