// Mirror-view landmark overlay for stance verification before recording.

import { OVERLAY_EDGES } from "./landmarks.js";
import type { RuntimeLandmark } from "./landmarks.js";

export function drawOverlay(
  canvas: HTMLCanvasElement,
  landmarks: RuntimeLandmark[],
  highlighted: Set<number> = new Set(),
): void {
  const ctx = canvas.getContext("2d");
  if (!ctx) return;
  const { width, height } = canvas;
  ctx.clearRect(0, 0, width, height);
  // mirror horizontally so the preview behaves like a mirror
  const px = (p: RuntimeLandmark) => (1 - p.x) * width;
  const py = (p: RuntimeLandmark) => p.y * height;

  ctx.strokeStyle = "rgba(96, 200, 120, 0.9)";
  ctx.lineWidth = 2;
  for (const [a, b] of OVERLAY_EDGES) {
    const pa = landmarks[a];
    const pb = landmarks[b];
    if (!pa || !pb) continue;
    ctx.beginPath();
    ctx.moveTo(px(pa), py(pa));
    ctx.lineTo(px(pb), py(pb));
    ctx.stroke();
  }
  landmarks.forEach((p, i) => {
    const dim = (p.visibility ?? 1) < 0.5;
    ctx.fillStyle = highlighted.has(i)
      ? "rgba(255, 180, 40, 0.95)"
      : dim
        ? "rgba(220, 80, 80, 0.6)"
        : "rgba(96, 200, 120, 0.9)";
    ctx.beginPath();
    ctx.arc(px(p), py(p), highlighted.has(i) ? 5 : 3, 0, 2 * Math.PI);
    ctx.fill();
  });
}
