/**
 * Side-by-side compare panel: up to four panes share one orbit pose but
 * each pane picks its own render mode (rgb next to normal, etc.).
 */

import { PaneClient, PaneClientOptions } from "./client.js";
import { RenderMode, ViewState, withMode } from "./viewstate.js";

export const MAX_PANES = 4;
export const MIN_PANES = 1;

export interface Pane {
  mode: RenderMode;
  client: PaneClient;
}

export class ComparePanel {
  readonly panes: Pane[] = [];
  private pose: ViewState;
  private readonly clientOptions: (paneIndex: number) => PaneClientOptions;

  constructor(
    initial: ViewState,
    clientOptions: (paneIndex: number) => PaneClientOptions = () => ({}),
  ) {
    this.pose = initial;
    this.clientOptions = clientOptions;
    this.addPane(initial.mode);
  }

  get sharedPose(): ViewState {
    return this.pose;
  }

  /** New panes join at the current pose; at most MAX_PANES. */
  addPane(mode: RenderMode): Pane {
    if (this.panes.length >= MAX_PANES) {
      throw new Error(`at most ${MAX_PANES} panes`);
    }
    const pane: Pane = { mode, client: new PaneClient(this.clientOptions(this.panes.length)) };
    this.panes.push(pane);
    pane.client.request(withMode(this.pose, mode));
    return pane;
  }

  /** Removing never drops below MIN_PANES. */
  removePane(index: number): void {
    if (this.panes.length <= MIN_PANES) {
      throw new Error(`at least ${MIN_PANES} pane`);
    }
    const [pane] = this.panes.splice(index, 1);
    pane.client.dispose();
  }

  /** One pose update fans out to every pane with its own mode. */
  setPose(pose: ViewState): void {
    this.pose = pose;
    for (const pane of this.panes) {
      pane.client.request(withMode(pose, pane.mode));
    }
  }

  /** Mode changes refetch the same pose for that pane only. */
  setMode(index: number, mode: RenderMode): void {
    const pane = this.panes[index];
    pane.mode = mode;
    pane.client.request(withMode(this.pose, mode));
  }
}
