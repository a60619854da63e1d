// DOM wiring for the capture client.

import { ApiClient } from "./api.js";
import { WEBCAM_LANDMARK_NAMES } from "./landmarks.js";
import { drawOverlay } from "./overlay.js";
import { CameraPoseSource } from "./pose.js";
import { JsonlReplaySource } from "./replay.js";
import { SessionController, TARGET_REPETITIONS } from "./session.js";
import type { LiveAngleUpdate } from "./types.js";

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

const serviceUrl =
  new URLSearchParams(location.search).get("service") ?? location.origin;
const client = new ApiClient(serviceUrl);

const subjectInput = el<HTMLInputElement>("subject");
const newSessionBtn = el<HTMLButtonElement>("new-session");
const movementSelect = el<HTMLSelectElement>("movement");
const sideSelect = el<HTMLSelectElement>("side");
const hintText = el<HTMLParagraphElement>("orientation-hint");
const startBtn = el<HTMLButtonElement>("start");
const stopBtn = el<HTMLButtonElement>("stop");
const replayInput = el<HTMLInputElement>("replay-file");
const video = el<HTMLVideoElement>("preview");
const canvas = el<HTMLCanvasElement>("overlay");
const liveAngle = el<HTMLSpanElement>("live-angle");
const liveMax = el<HTMLSpanElement>("live-max");
const liveDropped = el<HTMLSpanElement>("live-dropped");
const statusText = el<HTMLSpanElement>("status");
const historyBody = el<HTMLTableSectionElement>("history-body");
const summaryRow = el<HTMLTableRowElement>("summary-row");
const errorBox = el<HTMLDivElement>("error-box");

let controller: SessionController | null = null;
let activeSource: CameraPoseSource | JsonlReplaySource | null = null;
let segmentHighlight = new Set<number>();

function fmt(x: number | null): string {
  return x === null ? "–" : `${x.toFixed(2)}°`;
}

function renderUpdate(update: LiveAngleUpdate): void {
  liveAngle.textContent = fmt(update.alpha);
  liveMax.textContent = fmt(controller?.displayedRunningMax ?? null);
  liveDropped.textContent = String(update.dropped_low_visibility);
  if (update.dropped_low_visibility > 0) {
    liveDropped.classList.add("warn");
  }
}

function renderControls(): void {
  const recording = controller?.status === "recording";
  startBtn.disabled = !controller?.canStart;
  stopBtn.disabled = !recording;
  movementSelect.disabled = !!recording;
  sideSelect.disabled = !!recording || !sidedSelected();
  replayInput.disabled = !!recording;
  statusText.textContent = controller?.status ?? "no session";
  statusText.className = controller?.status ?? "";
}

function sidedSelected(): boolean {
  const m = controller?.movements.find((x) => x.name === movementSelect.value);
  return m?.sided ?? false;
}

async function renderHistory(): Promise<void> {
  if (!controller) return;
  historyBody.replaceChildren();
  for (const rep of controller.history) {
    const row = document.createElement("tr");
    row.innerHTML =
      `<td>${rep.repetition}</td><td>${rep.rom_deg.toFixed(2)}°</td>` +
      `<td>${rep.anomaly_count}</td>` +
      `<td>${rep.needs_review ? "⚠ re-test advised" : "ok"}</td>`;
    if (rep.needs_review) row.classList.add("review");
    historyBody.appendChild(row);
  }
  const summary = await controller.fetchSummary();
  summaryRow.innerHTML =
    `<td>${summary.count}/${TARGET_REPETITIONS} reps</td>` +
    `<td>mean ${fmt(summary.mean_rom_deg)}</td>` +
    `<td>range ${fmt(summary.range_rom_deg)}</td>` +
    `<td>${summary.any_needs_review ? "⚠ review" : ""}</td>`;
}

function showError(message: string): void {
  errorBox.textContent = message;
  errorBox.hidden = false;
}

newSessionBtn.addEventListener("click", async () => {
  try {
    errorBox.hidden = true;
    controller = new SessionController(client, {
      onUpdate: renderUpdate,
      onStatus: renderControls,
      onError: showError,
    });
    await controller.init(subjectInput.value || "anonymous");
    movementSelect.replaceChildren(new Option("— select movement —", ""));
    for (const m of controller.movements) {
      movementSelect.appendChild(new Option(m.name, m.name));
    }
    historyBody.replaceChildren();
    summaryRow.innerHTML = "";
    renderControls();
  } catch (err) {
    showError(`cannot reach service at ${serviceUrl}: ${err}`);
  }
});

function applySelection(): void {
  if (!controller || !movementSelect.value) {
    hintText.textContent = "";
    renderControls();
    return;
  }
  try {
    const side = sidedSelected() ? sideSelect.value || null : null;
    if (sidedSelected() && !side) {
      hintText.textContent = "Pick a side for this movement.";
      renderControls();
      startBtn.disabled = true;
      return;
    }
    const movement = controller.selectMovement(movementSelect.value, side);
    hintText.textContent =
      `${movement.orientation_hint} Guidance: stand about 4 m from the ` +
      `camera, lens at chest height, whole body in frame.`;
    void renderHistory();
  } catch (err) {
    showError(String(err));
  }
  renderControls();
}

movementSelect.addEventListener("change", applySelection);
sideSelect.addEventListener("change", applySelection);

startBtn.addEventListener("click", async () => {
  if (!controller) return;
  try {
    errorBox.hidden = true;
    const started = await controller.startRepetition();
    segmentHighlight = new Set(
      started.segment_landmarks.map((n) => WEBCAM_LANDMARK_NAMES.indexOf(n)),
    );
    renderControls();
    const camera = new CameraPoseSource(video, (landmarks) =>
      drawOverlay(canvas, landmarks, segmentHighlight),
    );
    activeSource = camera;
    await controller.streamFrom(camera);
  } catch (err) {
    showError(`recording failed: ${err}`);
    renderControls();
  }
});

stopBtn.addEventListener("click", async () => {
  if (!controller) return;
  activeSource?.stop();
  try {
    const card = await controller.stopRepetition();
    liveMax.textContent = `${card.rom_deg.toFixed(2)}°`;
    await renderHistory();
  } catch (err) {
    showError(`stop failed: ${err}`);
  }
  renderControls();
});

// Fixture playback: replays a recorded landmark file through the exact
// same streaming path as the camera.
replayInput.addEventListener("change", async () => {
  const file = replayInput.files?.[0];
  if (!file || !controller) return;
  try {
    errorBox.hidden = true;
    const source = new JsonlReplaySource(await file.text(), 1);
    controller.selectMovement(source.movement, source.side);
    movementSelect.value = source.movement;
    await controller.startRepetition();
    renderControls();
    activeSource = source;
    await controller.streamFrom(source);
    const card = await controller.stopRepetition();
    liveMax.textContent = `${card.rom_deg.toFixed(2)}°`;
    await renderHistory();
  } catch (err) {
    showError(`replay failed: ${err}`);
  }
  renderControls();
});

renderControls();
