// Session state machine: movement selection, the three-repetition flow,
// the streaming loop, and the per-session summary. Displayed values are
// taken verbatim from service responses.

import type { ApiClient } from "./api.js";
import type {
  FramePayload,
  FrameSource,
  LiveAngleUpdate,
  MovementInfo,
  RomResultCard,
  StartedRecording,
} from "./types.js";

export type RecordingStatus = "idle" | "recording" | "failed";

export interface RepetitionEntry {
  repetition: number;
  rom_deg: number;
  needs_review: boolean;
  anomaly_count: number;
}

export interface RepetitionSummary {
  count: number;
  mean_rom_deg: number | null;
  range_rom_deg: number | null;
  any_needs_review: boolean;
}

export const TARGET_REPETITIONS = 3;

export interface SessionEvents {
  onUpdate?: (update: LiveAngleUpdate) => void;
  onStatus?: (status: RecordingStatus) => void;
  onError?: (message: string) => void;
}

export class SessionController {
  sessionId: string | null = null;
  movements: MovementInfo[] = [];
  selected: { movement: MovementInfo; side: string | null } | null = null;
  status: RecordingStatus = "idle";
  latestUpdate: LiveAngleUpdate | null = null;
  displayedRunningMax: number | null = null;
  history: RepetitionEntry[] = [];
  currentRecording: StartedRecording | null = null;
  failureMessage: string | null = null;

  constructor(
    private readonly client: ApiClient,
    private readonly events: SessionEvents = {},
  ) {}

  async init(subject: string): Promise<void> {
    this.movements = await this.client.movements();
    const session = await this.client.createSession(subject);
    this.sessionId = session.id;
  }

  /** Movement picker. Disabled while a recording is open. */
  selectMovement(name: string, side: string | null = null): MovementInfo {
    if (this.status === "recording") {
      throw new Error("cannot change movement while recording");
    }
    const movement = this.movements.find((m) => m.name === name);
    if (!movement) {
      throw new Error(`unknown movement: ${name}`);
    }
    if (movement.sided && side !== "left" && side !== "right") {
      throw new Error(`${name} needs a side (left or right)`);
    }
    if (!movement.sided && side !== null) {
      throw new Error(`${name} does not take a side`);
    }
    const changed =
      this.selected?.movement.name !== movement.name ||
      this.selected?.side !== side;
    this.selected = { movement, side };
    if (changed) {
      this.history = [];
    }
    return movement;
  }

  get orientationHint(): string | null {
    return this.selected?.movement.orientation_hint ?? null;
  }

  get canStart(): boolean {
    return (
      this.sessionId !== null &&
      this.selected !== null &&
      this.status !== "recording"
    );
  }

  get canStop(): boolean {
    return this.status === "recording";
  }

  async startRepetition(): Promise<StartedRecording> {
    if (!this.canStart || !this.selected || !this.sessionId) {
      throw new Error("select a movement before starting");
    }
    const started = await this.client.startRecording(
      this.sessionId,
      this.selected.movement.name,
      this.selected.side,
      this.history.length + 1,
    );
    this.currentRecording = started;
    this.latestUpdate = null;
    this.displayedRunningMax = null;
    this.failureMessage = null;
    this.setStatus("recording");
    return started;
  }

  async pushFrames(frames: FramePayload[]): Promise<LiveAngleUpdate> {
    if (!this.currentRecording || this.status !== "recording") {
      throw new Error("no open recording");
    }
    const update = await this.client.appendFrames(
      this.currentRecording.recording_id,
      frames,
    );
    this.latestUpdate = update;
    if (update.running_max !== null) {
      // service guarantees monotonicity; keep the display monotone even
      // if updates arrive out of order
      this.displayedRunningMax = Math.max(
        this.displayedRunningMax ?? update.running_max,
        update.running_max,
      );
    }
    this.events.onUpdate?.(update);
    return update;
  }

  async stopRepetition(): Promise<RomResultCard> {
    if (!this.currentRecording || this.status !== "recording") {
      throw new Error("no open recording");
    }
    let card: RomResultCard;
    try {
      card = await this.client.stopRecording(this.currentRecording.recording_id);
    } catch (err) {
      this.markFailed(err instanceof Error ? err.message : String(err));
      throw err;
    }
    this.history.push({
      repetition: card.repetition,
      rom_deg: card.rom_deg,
      needs_review: card.needs_review,
      anomaly_count: card.anomaly_count,
    });
    this.currentRecording = null;
    this.setStatus("idle");
    return card;
  }

  markFailed(message: string): void {
    this.failureMessage = message;
    this.currentRecording = null;
    this.setStatus("failed");
    this.events.onError?.(message);
  }

  /** Drive one repetition from a frame source: batches are posted
   * sequentially at the source's native pace. Used identically by live
   * capture and fixture replay. */
  async streamFrom(
    source: FrameSource,
    opts: { batchSize?: number } = {},
  ): Promise<void> {
    const batchSize = opts.batchSize ?? 1;
    let batch: FramePayload[] = [];
    let inflight: Promise<void> = Promise.resolve();
    let streamError: unknown = null;

    const flush = (frames: FramePayload[]) => {
      inflight = inflight.then(async () => {
        if (streamError || this.status !== "recording") return;
        try {
          await this.pushFrames(frames);
        } catch (err) {
          streamError = err;
          source.stop();
        }
      });
    };

    await source.start((frame) => {
      batch.push(frame);
      if (batch.length >= batchSize) {
        flush(batch);
        batch = [];
      }
    });
    if (batch.length > 0) {
      flush(batch);
    }
    await inflight;
    if (streamError) {
      this.markFailed(
        streamError instanceof Error ? streamError.message : String(streamError),
      );
      throw streamError;
    }
  }

  get repetitionsRemaining(): number {
    return Math.max(0, TARGET_REPETITIONS - this.history.length);
  }

  /** Movement label used by the service's results view. */
  get selectedLabel(): string | null {
    if (!this.selected) return null;
    const { movement, side } = this.selected;
    return side ? `${movement.name} [${side}]` : movement.name;
  }

  /** Session summary (mean, range, review flags) straight from the
   * service; the UI computes no statistics of its own. Empty history
   * yields an empty summary. */
  async fetchSummary(): Promise<RepetitionSummary> {
    const empty: RepetitionSummary = {
      count: 0,
      mean_rom_deg: null,
      range_rom_deg: null,
      any_needs_review: false,
    };
    if (!this.sessionId || !this.selectedLabel) return empty;
    const results = await this.client.sessionResults(this.sessionId);
    const block = results.movements[this.selectedLabel];
    if (!block) return empty;
    return {
      count: block.repetitions.length,
      mean_rom_deg: block.mean_rom_deg,
      range_rom_deg: block.range_rom_deg,
      any_needs_review: block.any_needs_review,
    };
  }

  private setStatus(status: RecordingStatus): void {
    this.status = status;
    this.events.onStatus?.(status);
  }
}
