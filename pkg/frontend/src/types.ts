// Payload shapes of the romkit session service API. Field names are fixed
// by the service; angles arrive already rounded to 2 decimals.

export type LandmarkName = string;

/** One frame in the service schema: [x, y, z, visibility] per landmark. */
export interface FramePayload {
  t: number;
  lm: Record<LandmarkName, [number, number, number, number]>;
}

export interface MovementInfo {
  name: string;
  sided: boolean;
  orientation: "lateral-sagittal" | "anterior-coronal";
  orientation_hint: string;
}

export interface SessionInfo {
  id: string;
  subject: string;
  created_at: string;
  recordings: RecordingMeta[];
}

export interface RecordingMeta {
  id: string;
  movement: string;
  side: string | null;
  repetition: number;
  status: "recording" | "completed" | "failed";
  rom_deg: number | null;
  needs_review: boolean | null;
}

export interface StartedRecording {
  recording_id: string;
  movement: string;
  side: string | null;
  orientation: string;
  orientation_hint: string;
  segment_landmarks: LandmarkName[];
}

export interface LiveAngleUpdate {
  t: number | null;
  alpha: number | null;
  running_max: number | null;
  frames_received: number;
  frames_accepted: number;
  dropped_low_visibility: number;
  rejected_out_of_order: number;
  rejected_degenerate: number;
}

export interface RomResultCard {
  recording_id: string;
  movement: string;
  side: string | null;
  repetition: number;
  rom_deg: number;
  peak_t: number;
  anomaly_count: number;
  needs_review: boolean;
  candidate_peaks: [number, number][];
}

export interface MovementResults {
  repetitions: {
    repetition: number;
    rom_deg: number;
    needs_review: boolean;
    anomaly_count: number;
  }[];
  mean_rom_deg: number;
  range_rom_deg: number;
  any_needs_review: boolean;
}

export interface SessionResults {
  session_id: string;
  subject: string;
  movements: Record<string, MovementResults>;
}

/** Anything that can feed frames to the streaming loop: the in-browser
 * pose runtime during live capture, or a recorded-file replay. */
export interface FrameSource {
  start(onFrame: (frame: FramePayload) => void): Promise<void>;
  stop(): void;
}
