// In-browser pose estimation as a FrameSource. The landmark model runs
// locally; only landmark coordinates ever leave the machine (no video is
// transmitted or recorded). The runtime is fetched lazily from its CDN so
// the app shell stays dependency-free and fixture replay works offline.

import { toFramePayload, type RuntimeLandmark } from "./landmarks.js";
import type { FramePayload, FrameSource } from "./types.js";

const VISION_CDN =
  "https://cdn.jsdelivr.net/npm/@mediapipe/tasks-vision@0.10.14";
const MODEL_URL =
  "https://storage.googleapis.com/mediapipe-models/pose_landmarker/" +
  "pose_landmarker_lite/float16/1/pose_landmarker_lite.task";

interface PoseLandmarkerLike {
  detectForVideo(
    video: HTMLVideoElement,
    timestampMs: number,
  ): { landmarks: RuntimeLandmark[][]; worldLandmarks: RuntimeLandmark[][] };
  close(): void;
}

interface VisionModule {
  FilesetResolver: {
    forVisionTasks(wasmPath: string): Promise<unknown>;
  };
  PoseLandmarker: {
    createFromOptions(
      fileset: unknown,
      options: Record<string, unknown>,
    ): Promise<PoseLandmarkerLike>;
  };
}

// URL import resolved at runtime by the browser, invisible to the bundler.
const importRuntime = new Function(
  "url",
  "return import(url);",
) as (url: string) => Promise<VisionModule>;

export interface CameraFrame {
  /** image-space landmarks, for the preview overlay */
  overlay: RuntimeLandmark[];
  /** metric world landmarks, what gets streamed */
  frame: FramePayload;
}

export class CameraPoseSource implements FrameSource {
  private landmarker: PoseLandmarkerLike | null = null;
  private running = false;
  private startedAt = 0;

  constructor(
    private readonly video: HTMLVideoElement,
    private readonly onOverlay?: (landmarks: RuntimeLandmark[]) => void,
  ) {}

  async start(onFrame: (frame: FramePayload) => void): Promise<void> {
    const vision = await importRuntime(`${VISION_CDN}/vision_bundle.mjs`);
    const fileset = await vision.FilesetResolver.forVisionTasks(
      `${VISION_CDN}/wasm`,
    );
    this.landmarker = await vision.PoseLandmarker.createFromOptions(fileset, {
      baseOptions: { modelAssetPath: MODEL_URL },
      runningMode: "VIDEO",
      numPoses: 1,
    });
    const stream = await navigator.mediaDevices.getUserMedia({ video: true });
    this.video.srcObject = stream;
    await this.video.play();
    this.running = true;
    this.startedAt = performance.now();

    const tick = () => {
      if (!this.running || !this.landmarker) return;
      const now = performance.now();
      const result = this.landmarker.detectForVideo(this.video, now);
      if (result.worldLandmarks.length > 0) {
        this.onOverlay?.(result.landmarks[0]);
        onFrame(toFramePayload(result.worldLandmarks[0],
                               (now - this.startedAt) / 1000));
      }
      requestAnimationFrame(tick);
    };
    requestAnimationFrame(tick);
  }

  stop(): void {
    this.running = false;
    const stream = this.video.srcObject as MediaStream | null;
    stream?.getTracks().forEach((track) => track.stop());
    this.video.srcObject = null;
    this.landmarker?.close();
    this.landmarker = null;
  }
}
