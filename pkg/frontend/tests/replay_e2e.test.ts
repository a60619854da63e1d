// End-to-end against the real session service: replaying a recorded
// landmark file through the client's streaming path must produce the
// same final ROM card value as the offline CLI, and live updates must
// keep up with the input rate.

import { execFile, spawn, type ChildProcess } from "node:child_process";
import { mkdtempSync, readFileSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";
import { promisify } from "node:util";
import { afterAll, beforeAll, describe, expect, it } from "vitest";

import { ApiClient } from "../src/api.js";
import { JsonlReplaySource } from "../src/replay.js";
import { SessionController } from "../src/session.js";
import type { LiveAngleUpdate } from "../src/types.js";

const execFileAsync = promisify(execFile);

const PORT = 8900 + (process.pid % 500);
const BASE = `http://127.0.0.1:${PORT}`;
const FIXTURE = join(__dirname, "..", "fixtures", "back_flexion_137.jsonl");

let server: ChildProcess;

beforeAll(async () => {
  const dataDir = mkdtempSync(join(tmpdir(), "romkit-ui-e2e-"));
  server = spawn(
    "romkit",
    ["serve", "--bind", `127.0.0.1:${PORT}`, "--data-dir", dataDir],
    { stdio: "ignore" },
  );
  const deadline = Date.now() + 20_000;
  for (;;) {
    try {
      const res = await fetch(`${BASE}/health`);
      if (res.ok) break;
    } catch {
      // not up yet
    }
    if (Date.now() > deadline) {
      throw new Error("session service failed to start");
    }
    await new Promise((r) => setTimeout(r, 150));
  }
}, 30_000);

afterAll(() => {
  server?.kill("SIGTERM");
});

describe("fixture replay against the live service", () => {
  it("final ROM card equals the CLI result on the same file", async () => {
    const client = new ApiClient(BASE);
    const controller = new SessionController(client);
    await controller.init("ui-e2e");

    const text = readFileSync(FIXTURE, "utf-8");
    const source = new JsonlReplaySource(text, Infinity);
    controller.selectMovement(source.movement, source.side);
    await controller.startRepetition();
    await controller.streamFrom(source, { batchSize: 4 });
    const card = await controller.stopRepetition();

    const { stdout } = await execFileAsync("romkit", [
      "analyze", FIXTURE, "--json", "--dry-run",
    ]);
    const cli = JSON.parse(stdout) as { rom_deg: number };
    expect(card.rom_deg).toBe(Number(cli.rom_deg.toFixed(2)));
    expect(card.rom_deg).toBe(137.0);
    expect(card.needs_review).toBe(false);
  }, 30_000);

  it("live updates render at >= 10 Hz for 15 FPS input", async () => {
    const client = new ApiClient(BASE);
    const updates: LiveAngleUpdate[] = [];
    const controller = new SessionController(client, {
      onUpdate: (u) => updates.push(u),
    });
    await controller.init("ui-rate");

    const text = readFileSync(FIXTURE, "utf-8");
    const source = new JsonlReplaySource(text, 1); // native 15 FPS pacing
    controller.selectMovement(source.movement, source.side);
    await controller.startRepetition();
    const t0 = performance.now();
    await controller.streamFrom(source, { batchSize: 1 });
    const elapsedS = (performance.now() - t0) / 1000;
    await controller.stopRepetition();

    const rate = updates.length / elapsedS;
    expect(updates.length).toBeGreaterThanOrEqual(60);
    expect(rate).toBeGreaterThanOrEqual(10);
  }, 30_000);

  it("displayed running max is non-decreasing and server-fed", async () => {
    const client = new ApiClient(BASE);
    const maxima: (number | null)[] = [];
    const controller = new SessionController(client, {
      onUpdate: () => maxima.push(controller.displayedRunningMax),
    });
    await controller.init("ui-max");

    const text = readFileSync(FIXTURE, "utf-8");
    const source = new JsonlReplaySource(text, Infinity);
    controller.selectMovement(source.movement, source.side);
    await controller.startRepetition();
    await controller.streamFrom(source, { batchSize: 6 });
    await controller.stopRepetition();

    const seen = maxima.filter((m): m is number => m !== null);
    expect(seen.length).toBeGreaterThan(3);
    for (let i = 1; i < seen.length; i++) {
      expect(seen[i]).toBeGreaterThanOrEqual(seen[i - 1]);
    }
  }, 30_000);

  it("server-push channel mirrors the updates", async () => {
    const client = new ApiClient(BASE);
    const controller = new SessionController(client);
    await controller.init("ui-sse");

    const text = readFileSync(FIXTURE, "utf-8");
    const source = new JsonlReplaySource(text, Infinity);
    controller.selectMovement(source.movement, source.side);
    const started = await controller.startRepetition();

    const pushed: LiveAngleUpdate[] = [];
    let closed = false;
    const unsubscribe = client.subscribeLive(
      started.recording_id,
      (u) => pushed.push(u),
      () => { closed = true; },
    );
    await new Promise((r) => setTimeout(r, 200));
    await controller.streamFrom(source, { batchSize: 10 });
    await controller.stopRepetition();
    const deadline = Date.now() + 5000;
    while (!closed && Date.now() < deadline) {
      await new Promise((r) => setTimeout(r, 50));
    }
    unsubscribe();
    expect(pushed.length).toBeGreaterThanOrEqual(5);
    expect(closed).toBe(true);
    const last = pushed[pushed.length - 1];
    expect(last.frames_accepted).toBe(61);
  }, 30_000);

  it("session results endpoint aggregates the repetitions", async () => {
    const client = new ApiClient(BASE);
    const controller = new SessionController(client);
    await controller.init("ui-summary");
    const text = readFileSync(FIXTURE, "utf-8");

    for (let rep = 1; rep <= 3; rep++) {
      const source = new JsonlReplaySource(text, Infinity);
      if (rep === 1) controller.selectMovement(source.movement, source.side);
      await controller.startRepetition();
      await controller.streamFrom(source, { batchSize: 8 });
      await controller.stopRepetition();
    }
    const summary = await controller.fetchSummary();
    expect(summary.count).toBe(3);
    expect(summary.mean_rom_deg).toBe(137.0);
    expect(summary.range_rom_deg).toBe(0.0);
    expect(summary.any_needs_review).toBe(false);
  }, 45_000);
});
