/**
 * End-to-end flow against a locally running review service.
 *
 * Spawns the Python service with a 4-item scripted batch, drives the real
 * app through register -> judge 4 items (one of each choice) -> completion
 * screen, then asserts the server's distribution report holds one count in
 * each of the four method-resolved regions.
 *
 * The driver knows the fixture's ground-truth answer texts (it wrote them),
 * so it can aim one judgment at each region without ever seeing the
 * server-side mapping; the app itself only sees Answer A / Answer B.
 */

import { spawn, type ChildProcess } from "node:child_process";
import { mkdtempSync, writeFileSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";
import { afterAll, beforeAll, expect, it } from "vitest";

import { ReviewApi } from "../src/api.js";
import { ReviewApp } from "../src/app.js";

const PORT = 8950 + (process.pid % 40);
const BASE = `http://127.0.0.1:${PORT}`;

const GOOD = (i: number) => `checked answer ${i}`;
const RAW = (i: number) => `unchecked answer ${i}`;

let server: ChildProcess;

function fixtureItems(): string {
  const lines = [];
  for (let i = 0; i < 4; i++) {
    lines.push(
      JSON.stringify({
        schema: "review-item/v1",
        id: `item-${i}`,
        question: `Does sample ${i} hold up against its sources?`,
        documents: [
          {
            id: `doc-${i}`,
            title: `Source ${i}`,
            blocks: [
              { kind: "text", text: `Prose evidence for sample ${i}.` },
              { kind: "table", rows: [["Fact", "Value"], ["Count", "539"]], header: true },
            ],
          },
        ],
        answers: { validated: GOOD(i), baseline: RAW(i) },
        mode: "AB",
      }),
    );
  }
  return lines.join("\n") + "\n";
}

async function waitForHealth(): Promise<void> {
  for (let attempt = 0; attempt < 60; attempt++) {
    try {
      const response = await fetch(`${BASE}/health`);
      if (response.ok) {
        return;
      }
    } catch {
      // not up yet
    }
    await new Promise((resolve) => setTimeout(resolve, 250));
  }
  throw new Error("review service did not come up");
}

beforeAll(async () => {
  const dir = mkdtempSync(join(tmpdir(), "review-ui-"));
  const itemsPath = join(dir, "items.jsonl");
  writeFileSync(itemsPath, fixtureItems());
  server = spawn(
    "python3",
    [
      "-m", "mmqasynth.cli", "serve-review",
      "--port", String(PORT),
      "--items", itemsPath,
      "--batches", "1",
      "--batch-size", "4",
      "--raters", "1",
      "--seed", "5",
    ],
    { stdio: "ignore" },
  );
  await waitForHealth();
});

afterAll(() => {
  server?.kill();
});

function q<T extends HTMLElement>(root: HTMLElement, selector: string): T {
  const node = root.querySelector<T>(selector);
  if (node === null) {
    throw new Error(`missing ${selector}; dom: ${root.innerHTML.slice(0, 400)}`);
  }
  return node;
}

async function until(check: () => boolean, what: string): Promise<void> {
  for (let attempt = 0; attempt < 200; attempt++) {
    if (check()) {
      return;
    }
    await new Promise((resolve) => setTimeout(resolve, 25));
  }
  throw new Error(`timed out waiting for ${what}`);
}

it("completes register -> judge 4 items -> completion, one count per region", async () => {
  document.body.innerHTML = '<div id="app"></div>';
  const root = document.getElementById("app")!;
  const app = new ReviewApp(root, new ReviewApi(BASE));
  await app.start("e2e-annotator");

  // aim the four judgments at the four regions, in this order
  const targets = ["validated_correct", "baseline_correct", "both", "neither"];
  for (const target of targets) {
    await until(() => root.querySelector('[data-testid="item"]') !== null, "next item");
    const itemId = app.state.current?.item_id;
    const answerA = q(root, '[data-testid="answer-a"]').textContent ?? "";
    const aIsValidated = answerA.includes("checked answer") && !answerA.includes("unchecked");

    let choice: string;
    if (target === "both" || target === "neither") {
      choice = target;
    } else if (target === "validated_correct") {
      choice = aIsValidated ? "A_correct" : "B_correct";
    } else {
      choice = aIsValidated ? "B_correct" : "A_correct";
    }

    q<HTMLButtonElement>(root, '[data-testid="open-documents"]').click();
    const button = q<HTMLButtonElement>(root, `[data-testid="choice-${choice}"]`);
    expect(button.disabled).toBe(false);
    button.click();
    q<HTMLButtonElement>(root, '[data-testid="submit"]').click();
    // wait for the screen to move on (next item or completion), as a real
    // annotator would, before touching any controls again
    await until(
      () =>
        app.state.current?.item_id !== itemId ||
        root.querySelector('[data-testid="completion"]') !== null,
      `transition after judging ${itemId}`,
    );
  }

  await until(() => root.querySelector('[data-testid="completion"]') !== null, "completion screen");
  const completion = q(root, '[data-testid="completion"]');
  expect(completion.textContent).toContain("All items reviewed");
  expect(completion.textContent).toContain("100%");
  expect(app.state.judged).toBe(4);
  expect(app.state.pending).toBe(0);

  // the server agrees: every region received exactly one judgment
  const report = await (await fetch(`${BASE}/reports/distribution`)).json();
  expect(report.regions).toEqual({
    validated_correct: 1,
    baseline_correct: 1,
    both: 1,
    neither: 1,
  });
  expect(report.total_judgments).toBe(4);
});
