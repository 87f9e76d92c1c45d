/**
 * Rate-limited, sequence-numbered render client for one viewer pane.
 *
 * Concurrency model: a single in-flight request per pane with
 * latest-wins queuing. Interaction updates are debounced so at most one
 * request is issued per 100 ms window; while a request is in flight the
 * newest desired state is parked and issued on completion, and
 * intermediate states are dropped.
 *
 * Every request carries a monotonically increasing sequence number and
 * a response is displayed only if its number exceeds that of the frame
 * currently shown, so a stale response (e.g. one that timed out and was
 * superseded) can never overwrite a newer frame. Failures raise a
 * non-blocking banner message and the last good frame stays on screen.
 */

import { renderQuery, sameState, ViewState } from "./viewstate.js";

export const DEBOUNCE_MS = 100;
export const DEFAULT_TIMEOUT_MS = 10_000;

export interface FetchResponse {
  ok: boolean;
  status: number;
  headers: { get(name: string): string | null };
  blob(): Promise<Blob>;
}

/** fetch-shaped transport; injectable so tests can script deliveries. */
export type Fetcher = (url: string) => Promise<FetchResponse>;

export interface Frame {
  /** Pose/mode the request encoded; shown verbatim in the overlay. */
  state: ViewState;
  seq: number;
  image: Blob;
  /** Round-trip time measured at the client, milliseconds. */
  latencyMs: number;
  /** Per-stage timings reported by the server, if any. */
  serverTiming: string | null;
}

export interface PaneSnapshot {
  frame: Frame | null;
  banner: string | null;
  busy: boolean;
}

/**
 * Admits a response only if it is newer than everything displayed so
 * far; transport-level reordering therefore cannot regress the view.
 */
export class LatestFrameGate {
  private displayedSeq = 0;

  tryAdmit(seq: number): boolean {
    if (seq <= this.displayedSeq) return false;
    this.displayedSeq = seq;
    return true;
  }
}

export interface PaneClientOptions {
  baseUrl?: string;
  fetcher?: Fetcher;
  debounceMs?: number;
  timeoutMs?: number;
  /** Called after any change to the pane snapshot (frame/banner/busy). */
  onUpdate?: (snapshot: PaneSnapshot) => void;
  now?: () => number;
}

export class PaneClient {
  private readonly baseUrl: string;
  private readonly fetcher: Fetcher;
  private readonly debounceMs: number;
  private readonly timeoutMs: number;
  private readonly now: () => number;

  /** Notified after any change to the pane snapshot; reassignable so a
   * UI created after the client can subscribe. */
  onUpdate: (snapshot: PaneSnapshot) => void;

  private readonly gate = new LatestFrameGate();
  private seqCounter = 0;
  private inFlight = false;
  private inFlightSeq = 0;
  private desired: ViewState | null = null;
  private lastIssueAt = -Infinity;
  private debounceHandle: ReturnType<typeof setTimeout> | null = null;

  frame: Frame | null = null;
  banner: string | null = null;

  constructor(options: PaneClientOptions = {}) {
    this.baseUrl = options.baseUrl ?? "";
    this.fetcher = options.fetcher ?? ((url) => fetch(url) as Promise<FetchResponse>);
    this.debounceMs = options.debounceMs ?? DEBOUNCE_MS;
    this.timeoutMs = options.timeoutMs ?? DEFAULT_TIMEOUT_MS;
    this.onUpdate = options.onUpdate ?? (() => {});
    this.now = options.now ?? Date.now;
  }

  snapshot(): PaneSnapshot {
    return { frame: this.frame, banner: this.banner, busy: this.inFlight };
  }

  /** Latest-wins: remember the newest state and issue when allowed. */
  request(state: ViewState): void {
    if (this.frame && !this.inFlight && this.desired === null && sameState(state, this.frame.state)) {
      return; // already showing exactly this frame; stay idle
    }
    this.desired = state;
    this.pump();
  }

  /** Issue the desired state as soon as debounce and in-flight allow. */
  private pump(): void {
    if (this.desired === null || this.inFlight) return;
    const wait = this.lastIssueAt + this.debounceMs - this.now();
    if (wait > 0) {
      if (this.debounceHandle === null) {
        this.debounceHandle = setTimeout(() => {
          this.debounceHandle = null;
          this.pump();
        }, wait);
      }
      return;
    }
    const state = this.desired;
    this.desired = null;
    this.issue(state);
  }

  private issue(state: ViewState): void {
    const seq = ++this.seqCounter;
    this.inFlight = true;
    this.inFlightSeq = seq;
    this.lastIssueAt = this.now();
    const started = this.now();

    // a hung request must not wedge the pane: after the timeout the
    // pane moves on and the eventual response is discarded by the gate
    const timer = setTimeout(() => {
      if (this.inFlight && this.inFlightSeq === seq) {
        this.settle(seq, null, "render request timed out");
      }
    }, this.timeoutMs);

    this.fetcher(this.baseUrl + renderQuery(state)).then(
      async (response) => {
        clearTimeout(timer);
        if (!response.ok) {
          this.settle(seq, null, `render failed (HTTP ${response.status})`);
          return;
        }
        const image = await response.blob();
        this.settle(seq, {
          state,
          seq,
          image,
          latencyMs: this.now() - started,
          serverTiming: response.headers.get("server-timing"),
        }, null);
      },
      () => {
        clearTimeout(timer);
        this.settle(seq, null, "render service unreachable");
      },
    );
  }

  private settle(seq: number, frame: Frame | null, error: string | null): void {
    const isCurrent = this.inFlight && this.inFlightSeq === seq;
    if (isCurrent) this.inFlight = false;
    if (frame !== null) {
      // a success is displayed iff nothing newer already is — this also
      // rescues a slow response that outlived its timeout banner
      if (this.gate.tryAdmit(seq)) {
        this.frame = frame;
        this.banner = null;
        this.onUpdate(this.snapshot());
      }
    } else if (isCurrent) {
      // non-blocking: the last good frame stays up and the next
      // interaction re-issues naturally
      this.banner = error;
      this.onUpdate(this.snapshot());
    }
    this.pump();
  }

  dispose(): void {
    if (this.debounceHandle !== null) {
      clearTimeout(this.debounceHandle);
      this.debounceHandle = null;
    }
    this.desired = null;
  }
}
