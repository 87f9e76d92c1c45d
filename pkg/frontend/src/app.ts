/**
 * DOM wiring for the viewer: builds the pane grid, translates pointer
 * drags / wheel scrolls into pose updates, and renders each pane's
 * frame, latency overlay, and error banner.
 *
 * All interaction logic lives in the framework-free modules
 * (viewstate/client/panes); this file only touches the DOM.
 */

import { Frame, PaneSnapshot } from "./client.js";
import { ComparePanel, MAX_PANES, MIN_PANES, Pane } from "./panes.js";
import { checkHealth, fetchRig, rigRadius } from "./rig.js";
import {
  applyDrag,
  applyScroll,
  defaultState,
  RENDER_MODES,
  RenderMode,
  ViewState,
} from "./viewstate.js";

interface PaneDom {
  root: HTMLElement;
  img: HTMLImageElement;
  overlay: HTMLElement;
  banner: HTMLElement;
  objectUrl: string | null;
}

function overlayText(frame: Frame): string {
  const s = frame.state;
  const pose = `yaw ${s.yaw.toFixed(1)}°  pitch ${s.pitch.toFixed(1)}°  dist ${s.dist.toFixed(2)}`;
  const timing = frame.serverTiming ? `  server ${frame.serverTiming}` : "";
  return `${pose}  |  ${s.mode}  ${frame.latencyMs.toFixed(0)} ms${timing}`;
}

function renderSnapshot(dom: PaneDom, snapshot: PaneSnapshot): void {
  if (snapshot.frame) {
    const url = URL.createObjectURL(snapshot.frame.image);
    if (dom.objectUrl) URL.revokeObjectURL(dom.objectUrl);
    dom.objectUrl = url;
    dom.img.src = url;
    dom.overlay.textContent = overlayText(snapshot.frame);
  }
  dom.banner.textContent = snapshot.banner ?? "";
  dom.banner.style.display = snapshot.banner ? "block" : "none";
  dom.root.classList.toggle("busy", snapshot.busy);
}

export async function startViewer(container: HTMLElement, baseUrl = ""): Promise<void> {
  const fetcher = (url: string) => fetch(url);
  if (!(await checkHealth(baseUrl, fetcher))) {
    container.textContent =
      "render service unreachable — start it with: fvvren serve --scene <scene.json>";
    return;
  }
  const rig = await fetchRig(baseUrl, fetcher);
  const radius = rigRadius(rig);

  const grid = document.createElement("div");
  grid.className = "pane-grid";
  const toolbar = document.createElement("div");
  toolbar.className = "toolbar";
  container.append(toolbar, grid);

  const panel = new ComparePanel(defaultState(radius), () => ({ baseUrl }));

  function attach(pane: Pane): void {
    const root = document.createElement("div");
    root.className = "pane";
    const img = document.createElement("img");
    img.draggable = false;
    const overlay = document.createElement("div");
    overlay.className = "overlay";
    const banner = document.createElement("div");
    banner.className = "banner";
    banner.style.display = "none";
    const modeSelect = document.createElement("select");
    for (const mode of RENDER_MODES) {
      const opt = document.createElement("option");
      opt.value = mode;
      opt.textContent = mode;
      modeSelect.appendChild(opt);
    }
    modeSelect.value = pane.mode;
    modeSelect.addEventListener("change", () => {
      panel.setMode(panel.panes.indexOf(pane), modeSelect.value as RenderMode);
    });
    root.append(img, overlay, banner, modeSelect);
    grid.appendChild(root);

    const dom: PaneDom = { root, img, overlay, banner, objectUrl: null };
    pane.client.onUpdate = (snapshot: PaneSnapshot) => renderSnapshot(dom, snapshot);
    renderSnapshot(dom, pane.client.snapshot());
  }

  for (const pane of panel.panes) attach(pane);

  const addBtn = document.createElement("button");
  addBtn.textContent = "+ pane";
  addBtn.addEventListener("click", () => {
    if (panel.panes.length < MAX_PANES) attach(panel.addPane("rgb"));
  });
  const removeBtn = document.createElement("button");
  removeBtn.textContent = "− pane";
  removeBtn.addEventListener("click", () => {
    if (panel.panes.length > MIN_PANES) {
      const last = grid.lastElementChild;
      panel.removePane(panel.panes.length - 1);
      last?.remove();
    }
  });
  toolbar.append(addBtn, removeBtn);

  let dragging = false;
  let lastX = 0;
  let lastY = 0;
  grid.addEventListener("pointerdown", (e) => {
    dragging = true;
    lastX = e.clientX;
    lastY = e.clientY;
    grid.setPointerCapture(e.pointerId);
  });
  grid.addEventListener("pointermove", (e) => {
    if (!dragging) return;
    const next: ViewState = applyDrag(panel.sharedPose, e.clientX - lastX, e.clientY - lastY);
    lastX = e.clientX;
    lastY = e.clientY;
    panel.setPose(next);
  });
  grid.addEventListener("pointerup", () => {
    dragging = false;
  });
  grid.addEventListener(
    "wheel",
    (e) => {
      e.preventDefault();
      panel.setPose(applyScroll(panel.sharedPose, Math.sign(e.deltaY), radius));
    },
    { passive: false },
  );
}
