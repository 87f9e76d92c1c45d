/**
 * Startup queries against the render service: liveness and the camera
 * rig, from which the orbit-distance limits are derived.
 *
 * Rig JSON shape (GET /rig): `center` is the scene center, and each
 * camera carries world-to-camera `rotation` (row-major 3x3, 9 floats)
 * and `translation` (3 floats), so the camera center in world
 * coordinates is -R^T t.
 */

import { Fetcher } from "./client.js";

export interface RigCamera {
  fx: number;
  fy: number;
  cx: number;
  cy: number;
  width: number;
  height: number;
  rotation: number[];
  translation: number[];
}

export interface Rig {
  center: number[];
  cameras: RigCamera[];
}

/** World-space camera center: -R^T t. */
export function cameraPosition(cam: RigCamera): [number, number, number] {
  const r = cam.rotation;
  const t = cam.translation;
  return [
    -(r[0] * t[0] + r[3] * t[1] + r[6] * t[2]),
    -(r[1] * t[0] + r[4] * t[1] + r[7] * t[2]),
    -(r[2] * t[0] + r[5] * t[1] + r[8] * t[2]),
  ];
}

/** Mean camera distance from the rig center: the orbit radius that
 * anchors the zoom clamp. */
export function rigRadius(rig: Rig): number {
  if (rig.cameras.length === 0) {
    throw new Error("rig has no cameras");
  }
  let total = 0;
  for (const cam of rig.cameras) {
    const p = cameraPosition(cam);
    total += Math.hypot(p[0] - rig.center[0], p[1] - rig.center[1], p[2] - rig.center[2]);
  }
  return total / rig.cameras.length;
}

export async function fetchRig(baseUrl: string, fetcher: Fetcher): Promise<Rig> {
  const response = await fetcher(`${baseUrl}/rig`);
  if (!response.ok) {
    throw new Error(`GET /rig failed (HTTP ${response.status})`);
  }
  const text = await response.blob().then((b) => b.text());
  return JSON.parse(text) as Rig;
}

export async function checkHealth(baseUrl: string, fetcher: Fetcher): Promise<boolean> {
  try {
    const response = await fetcher(`${baseUrl}/health`);
    return response.ok;
  } catch {
    return false;
  }
}
