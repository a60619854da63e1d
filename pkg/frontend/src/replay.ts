// Fixture playback: replays a recorded landmark stream (the service's
// JSONL format) through the same streaming path as live capture.

import type { FramePayload, FrameSource } from "./types.js";

export interface RecordingFile {
  header: Record<string, unknown>;
  frames: FramePayload[];
}

/** Parse the landmark-stream JSONL format: header line, then frames. */
export function parseRecordingJsonl(text: string): RecordingFile {
  const lines = text.split("\n").filter((l) => l.trim().length > 0);
  if (lines.length === 0) {
    throw new Error("empty recording file");
  }
  const first = JSON.parse(lines[0]) as { header?: Record<string, unknown> };
  if (!first.header) {
    throw new Error("recording file must start with a header line");
  }
  const frames = lines.slice(1).map((line) => JSON.parse(line) as FramePayload);
  return { header: first.header, frames };
}

export class JsonlReplaySource implements FrameSource {
  private stopped = false;
  readonly recording: RecordingFile;

  /** speed 1 replays at the recorded pace; higher is proportionally
   * faster; Infinity emits frames back to back. */
  constructor(text: string, private readonly speed: number = 1) {
    this.recording = parseRecordingJsonl(text);
  }

  get movement(): string {
    return String(this.recording.header["movement"] ?? "");
  }

  get side(): string | null {
    return (this.recording.header["side"] as string | null) ?? null;
  }

  async start(onFrame: (frame: FramePayload) => void): Promise<void> {
    this.stopped = false;
    let prevT: number | null = null;
    for (const frame of this.recording.frames) {
      if (this.stopped) break;
      if (prevT !== null && Number.isFinite(this.speed)) {
        const waitMs = ((frame.t - prevT) * 1000) / this.speed;
        if (waitMs > 0) {
          await new Promise((resolve) => setTimeout(resolve, waitMs));
        }
      }
      prevT = frame.t;
      if (this.stopped) break;
      onFrame(frame);
    }
  }

  stop(): void {
    this.stopped = true;
  }
}
