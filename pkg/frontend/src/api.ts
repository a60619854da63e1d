// Thin fetch client over the session service. The UI does no angle math:
// every number it shows comes back from one of these calls.

import type {
  FramePayload,
  LiveAngleUpdate,
  MovementInfo,
  RomResultCard,
  SessionInfo,
  SessionResults,
  StartedRecording,
} from "./types.js";

export class ApiError extends Error {
  constructor(readonly status: number, message: string) {
    super(message);
  }
}

async function asJson<T>(response: Response): Promise<T> {
  const body = await response.json().catch(() => ({}));
  if (!response.ok) {
    const detail = (body as { error?: string }).error ?? response.statusText;
    throw new ApiError(response.status, detail);
  }
  return body as T;
}

export class ApiClient {
  constructor(readonly baseUrl: string) {}

  private url(path: string): string {
    return `${this.baseUrl}${path}`;
  }

  private post<T>(path: string, body?: unknown): Promise<T> {
    return fetch(this.url(path), {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: body === undefined ? null : JSON.stringify(body),
    }).then((r) => asJson<T>(r));
  }

  private get<T>(path: string): Promise<T> {
    return fetch(this.url(path)).then((r) => asJson<T>(r));
  }

  health(): Promise<{ status: string }> {
    return this.get("/health");
  }

  movements(): Promise<MovementInfo[]> {
    return this.get("/movements");
  }

  createSession(subject: string): Promise<SessionInfo> {
    return this.post("/sessions", { subject });
  }

  getSession(sessionId: string): Promise<SessionInfo> {
    return this.get(`/sessions/${sessionId}`);
  }

  startRecording(
    sessionId: string,
    movement: string,
    side: string | null,
    repetition: number,
  ): Promise<StartedRecording> {
    return this.post(`/sessions/${sessionId}/recordings`, {
      movement,
      side,
      repetition,
    });
  }

  appendFrames(
    recordingId: string,
    frames: FramePayload[],
  ): Promise<LiveAngleUpdate> {
    return this.post(`/recordings/${recordingId}/frames`, { frames });
  }

  stopRecording(recordingId: string): Promise<RomResultCard> {
    return this.post(`/recordings/${recordingId}/stop`);
  }

  sessionResults(sessionId: string): Promise<SessionResults> {
    return this.get(`/sessions/${sessionId}/results`);
  }

  /** Subscribe to the server-push update channel (SSE). Returns an abort
   * function; `onUpdate` fires for every pushed LiveAngleUpdate until the
   * recording closes. */
  subscribeLive(
    recordingId: string,
    onUpdate: (update: LiveAngleUpdate) => void,
    onClose?: () => void,
  ): () => void {
    const controller = new AbortController();
    (async () => {
      try {
        const response = await fetch(
          this.url(`/recordings/${recordingId}/live`),
          { signal: controller.signal },
        );
        const reader = response.body?.getReader();
        if (!reader) return;
        const decoder = new TextDecoder();
        let buffer = "";
        for (;;) {
          const { done, value } = await reader.read();
          if (done) break;
          buffer += decoder.decode(value, { stream: true });
          let sep;
          while ((sep = buffer.indexOf("\n\n")) >= 0) {
            const chunk = buffer.slice(0, sep);
            buffer = buffer.slice(sep + 2);
            for (const line of chunk.split("\n")) {
              if (line.startsWith("data: ")) {
                onUpdate(JSON.parse(line.slice(6)) as LiveAngleUpdate);
              }
            }
          }
        }
      } catch {
        // aborted or connection lost; the close callback still fires
      } finally {
        onClose?.();
      }
    })();
    return () => controller.abort();
  }
}
