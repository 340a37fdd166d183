/**
 * Drives the real service end to end: spawns `voxplan serve` with a mock
 * transcript, then exercises the same client/model/view code the browser
 * runs. Requires the Python package to be installed (pip install -e ..).
 */

import { afterAll, beforeAll, describe, expect, it } from "vitest";
import { type ChildProcess, execFile, spawn } from "node:child_process";
import { mkdtempSync, readFileSync, writeFileSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";
import { promisify } from "node:util";

import { ApiClient } from "../src/api.js";
import { applyServerState, sameLabels, toViewModel } from "../src/model.js";
import { renderCompareCards, renderSessionPage, renderViewPane } from "../src/view.js";

const run = promisify(execFile);
const PY = process.env.PYTHON ?? "python3";
const PORT = 8090 + (process.pid % 500);
const BASE = `http://127.0.0.1:${PORT}`;

let server: ChildProcess | null = null;
let work: string;
let transcriptPath: string;
const api = new ApiClient(BASE);

async function cli(...args: string[]): Promise<string> {
  const { stdout } = await run(PY, ["-m", "voxplan.cli", ...args]);
  return stdout;
}

async function waitForHealthy(timeoutMs = 20000): Promise<void> {
  const deadline = Date.now() + timeoutMs;
  while (Date.now() < deadline) {
    try {
      const r = await fetch(`${BASE}/healthz`);
      if (r.ok) return;
    } catch {
      /* not up yet */
    }
    await new Promise((res) => setTimeout(res, 200));
  }
  throw new Error("service did not become healthy");
}

async function createSession(prompt: string, meshPath: string): Promise<string> {
  const mesh = readFileSync(meshPath);
  const resp = await fetch(`${BASE}/sessions`, {
    method: "POST",
    headers: { "Content-Type": "application/json" },
    body: JSON.stringify({ prompt, mesh_base64: mesh.toString("base64") }),
  });
  expect(resp.status).toBe(201);
  const body = (await resp.json()) as { id: string };
  const d = await fetch(`${BASE}/sessions/${body.id}/discretize`, {
    method: "POST",
    headers: { "Content-Type": "application/json" },
    body: JSON.stringify({}),
  });
  expect(d.status).toBe(200);
  return body.id;
}

function mergeTranscripts(paths: string[], out: string): void {
  const entries: Record<string, string[]> = {};
  for (const p of paths) {
    const doc = JSON.parse(readFileSync(p, "utf-8")) as {
      entries: Record<string, string[]>;
    };
    for (const [k, v] of Object.entries(doc.entries)) {
      entries[k] = (entries[k] ?? []).concat(v);
    }
  }
  writeFileSync(out, JSON.stringify({ version: 1, entries }));
}

beforeAll(async () => {
  work = mkdtempSync(join(tmpdir(), "voxplan-ui-"));
  const sessionsRoot = join(work, "sessions");
  transcriptPath = join(work, "transcript.json");
  writeFileSync(transcriptPath, JSON.stringify({ version: 1, entries: {} }));

  server = spawn(
    PY,
    [
      "-m",
      "voxplan.cli",
      "serve",
      "--host",
      "127.0.0.1",
      "--port",
      String(PORT),
      "--sessions-root",
      sessionsRoot,
      "--transcript",
      transcriptPath,
    ],
    { stdio: "ignore" },
  );
  await waitForHealthy();

  await cli("fixture", "--object", "chair", "-o", join(work, "chair.obj"));
  await cli("fixture", "--object", "table", "-o", join(work, "table.obj"));
}, 60000);

afterAll(() => {
  server?.kill();
});

describe("session page against the live service", () => {
  it("shows both renders, applies feedback, and compares strategies", async () => {
    const sessionsRoot = join(work, "sessions");
    const chairId = await createSession("Make me a chair", join(work, "chair.obj"));
    const tableId = await createSession("I want a table", join(work, "table.obj"));

    // canned replies keyed to each session's exact prompts + renders
    const chairT = join(work, "chair_transcript.json");
    const tableT = join(work, "table_transcript.json");
    await cli(
      "mock-transcript",
      "--session", join(sessionsRoot, chairId),
      "--parts", "seat, backrest",
      "--labels", "1,7",
      "--feedback", "I want panels on the seat::1",
      "-o", chairT,
    );
    await cli(
      "mock-transcript",
      "--session", join(sessionsRoot, tableId),
      "--parts", "tabletop",
      "--labels", "1",
      "-o", tableT,
    );
    mergeTranscripts([chairT, tableT], transcriptPath);

    // --- the session page shows both renders -------------------------
    let vm = toViewModel(await api.getSession(chairId));
    expect(vm.status).toBe("DISCRETIZED");
    const [sceneA, sceneB] = await Promise.all([
      api.getScene(chairId, "A"),
      api.getScene(chairId, "B"),
    ]);
    for (const view of ["A", "B"] as const) {
      const img = await fetch(api.renderUrl(chairId, view));
      expect(img.headers.get("content-type")).toContain("image/svg");
      expect((await img.text()).includes("<svg")).toBe(true);
    }
    const page = renderSessionPage(vm, {
      A: renderViewPane("A", api.renderUrl(chairId, "A"), sceneA, vm.highlight),
      B: renderViewPane("B", api.renderUrl(chairId, "B"), sceneB, vm.highlight),
    });
    expect((page.match(/<img /g) ?? []).length).toBe(2);

    // --- VLM assignment, then feedback replaces the highlight set ----
    vm = applyServerState(vm, await api.select(chairId, "VLM"));
    expect(sameLabels(vm.highlight, [1, 7])).toBe(true);

    vm = applyServerState(vm, await api.feedback(chairId, "I want panels on the seat"));
    expect(sameLabels(vm.highlight, [1])).toBe(true);
    const latest = vm.history[vm.history.length - 1];
    expect(latest?.origin).toBe("FEEDBACK");
    const overlayA = renderViewPane(
      "A", api.renderUrl(chairId, "A"), await api.getScene(chairId, "A"), vm.highlight,
    );
    expect(overlayA).toContain('data-label="1"');
    expect(overlayA).not.toContain('data-label="7"');

    // --- strategy comparison: three cards, RULE == VLM on the table --
    const cmp = await api.compare(tableId, 11);
    const cards = renderCompareCards(cmp, true);
    expect((cards.match(/class="card/g) ?? []).length).toBe(3);
    expect(cmp.rule.labels).toBeDefined();
    expect(cmp.vlm.labels).toBeDefined();
    expect(sameLabels(cmp.rule.labels ?? [], cmp.vlm.labels ?? [])).toBe(true);

    // adopting a card commits exactly one history entry
    let tableVm = toViewModel(await api.getSession(tableId));
    const before = tableVm.history.length;
    tableVm = applyServerState(tableVm, await api.select(tableId, "RULE"));
    expect(tableVm.history.length).toBe(before + 1);
    expect(tableVm.history[tableVm.history.length - 1]?.origin).toBe("RULE");

    // --- plan + download link -----------------------------------------
    vm = applyServerState(vm, await api.plan(chairId));
    expect(vm.planVerdict).toBe("PASS");
    expect(vm.canDownload).toBe(true);
    const program = await fetch(api.programUrl(chairId));
    const doc = (await program.json()) as { steps: unknown[] };
    expect(doc.steps.length).toBe(14);

    // feedback error keeps prior state (unknown transcript entry -> 502)
    const beforeErr = [...vm.highlight];
    await expect(api.feedback(chairId, "make it floral")).rejects.toMatchObject({
      status: 502,
    });
    const after = toViewModel(await api.getSession(chairId));
    expect(sameLabels(after.highlight, beforeErr)).toBe(true);
  }, 60000);
});
