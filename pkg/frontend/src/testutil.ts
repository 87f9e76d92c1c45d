/**
 * Scripted transport for tests: records every request URL and lets the
 * test resolve or reject each response by hand, in any order, so
 * out-of-order delivery and dead servers are easy to simulate.
 */

import { FetchResponse, Fetcher } from "./client.js";

export interface ScriptedRequest {
  url: string;
  respond(body?: string, status?: number): void;
  fail(): void;
}

export class ScriptedServer {
  readonly requests: ScriptedRequest[] = [];

  readonly fetcher: Fetcher = (url: string) => {
    return new Promise<FetchResponse>((resolve, reject) => {
      this.requests.push({
        url,
        respond: (body = "png", status = 200) =>
          resolve({
            ok: status >= 200 && status < 300,
            status,
            headers: { get: (name) => (name === "server-timing" ? "depth;dur=40" : null) },
            blob: () => Promise.resolve(new Blob([body])),
          }),
        fail: () => reject(new TypeError("fetch failed")),
      });
    });
  };

  /** Requests not yet resolved or rejected by the test. */
  get count(): number {
    return this.requests.length;
  }

  last(): ScriptedRequest {
    if (this.requests.length === 0) throw new Error("no requests issued");
    return this.requests[this.requests.length - 1];
  }
}

/** Yaw value encoded in a captured /render URL. */
export function yawOf(url: string): number {
  const params = new URL(url, "http://test").searchParams;
  return Number(params.get("yaw"));
}

export function modeOf(url: string): string {
  const params = new URL(url, "http://test").searchParams;
  return params.get("mode") ?? "";
}
