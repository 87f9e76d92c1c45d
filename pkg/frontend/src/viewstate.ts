/**
 * Virtual-camera view state and the input mappings that update it.
 *
 * The pose is an orbit around the subject: yaw/pitch in degrees plus a
 * distance in scene units. Pitch is clamped to +-85 degrees and distance
 * to [0.5, 10] x the rig radius, so every state this module produces is
 * a valid /render query.
 */

export type RenderMode = "rgb" | "depth" | "normal" | "weights";

export const RENDER_MODES: readonly RenderMode[] = ["rgb", "depth", "normal", "weights"];

export const PITCH_LIMIT_DEG = 85;
export const DEGREES_PER_PIXEL = 0.3;
export const DIST_MIN_FACTOR = 0.5;
export const DIST_MAX_FACTOR = 10;
/** Multiplicative zoom step per scroll-wheel notch. */
export const ZOOM_STEP = 1.1;

export interface ViewState {
  /** Orbit azimuth, degrees (unbounded; wraps naturally). */
  yaw: number;
  /** Orbit elevation, degrees, clamped to [-85, 85]. */
  pitch: number;
  /** Camera distance from the scene center, scene units. */
  dist: number;
  /** Which channel of the render to display. */
  mode: RenderMode;
  /** Square output resolution in pixels. */
  res: number;
}

export function clampPitch(pitch: number): number {
  return Math.min(PITCH_LIMIT_DEG, Math.max(-PITCH_LIMIT_DEG, pitch));
}

export function clampDist(dist: number, rigRadius: number): number {
  return Math.min(DIST_MAX_FACTOR * rigRadius, Math.max(DIST_MIN_FACTOR * rigRadius, dist));
}

/** Horizontal drag maps to yaw, vertical drag to (clamped) pitch. */
export function applyDrag(state: ViewState, dxPx: number, dyPx: number): ViewState {
  return {
    ...state,
    yaw: state.yaw + dxPx * DEGREES_PER_PIXEL,
    pitch: clampPitch(state.pitch + dyPx * DEGREES_PER_PIXEL),
  };
}

/** Scroll zooms: positive notches move away, negative move closer. */
export function applyScroll(state: ViewState, notches: number, rigRadius: number): ViewState {
  return { ...state, dist: clampDist(state.dist * Math.pow(ZOOM_STEP, notches), rigRadius) };
}

export function withMode(state: ViewState, mode: RenderMode): ViewState {
  return { ...state, mode };
}

/** Two states request the same frame iff every field matches. */
export function sameState(a: ViewState, b: ViewState): boolean {
  return (
    a.yaw === b.yaw &&
    a.pitch === b.pitch &&
    a.dist === b.dist &&
    a.mode === b.mode &&
    a.res === b.res
  );
}

/** Query string for GET /render, matching the service parameter names. */
export function renderQuery(state: ViewState): string {
  const params = new URLSearchParams({
    yaw: String(state.yaw),
    pitch: String(state.pitch),
    dist: String(state.dist),
    mode: state.mode,
    res: String(state.res),
  });
  return `/render?${params.toString()}`;
}

export function defaultState(rigRadius: number): ViewState {
  return { yaw: 0, pitch: 0, dist: rigRadius, mode: "rgb", res: 256 };
}
