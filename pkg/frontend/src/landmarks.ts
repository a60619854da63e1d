// The 33-point pose topology, in the pose runtime's landmark index order.
// Index i of the runtime output maps to WEBCAM_LANDMARK_NAMES[i] in the
// service's frame schema.

export const WEBCAM_LANDMARK_NAMES: readonly string[] = [
  "NOSE",
  "LEYI", "LEYE", "LEYO",
  "REYI", "REYE", "REYO",
  "LEAR", "REAR",
  "LMTH", "RMTH",
  "LSHO", "RSHO",
  "LELB", "RELB",
  "LWRI", "RWRI",
  "LPNK", "RPNK",
  "LIDX", "RIDX",
  "LTHM", "RTHM",
  "LHIP", "RHIP",
  "LKNE", "RKNE",
  "LANK", "RANK",
  "LHEE", "RHEE",
  "LTOE", "RTOE",
];

// Skeleton edges for the mirror-preview overlay (index pairs).
export const OVERLAY_EDGES: readonly [number, number][] = [
  [11, 12], [11, 13], [13, 15], [12, 14], [14, 16],
  [11, 23], [12, 24], [23, 24],
  [23, 25], [25, 27], [24, 26], [26, 28],
  [27, 29], [29, 31], [28, 30], [30, 32],
  [7, 0], [0, 8],
];

export interface RuntimeLandmark {
  x: number;
  y: number;
  z: number;
  visibility?: number;
}

/** Convert one pose-runtime result into the service's frame schema. */
export function toFramePayload(
  landmarks: RuntimeLandmark[],
  t: number,
): { t: number; lm: Record<string, [number, number, number, number]> } {
  const lm: Record<string, [number, number, number, number]> = {};
  landmarks.forEach((point, i) => {
    const name = WEBCAM_LANDMARK_NAMES[i];
    if (!name) return; // runtimes may append extra points; ignore them
    lm[name] = [point.x, point.y, point.z, point.visibility ?? 0.0];
  });
  return { t, lm };
}
