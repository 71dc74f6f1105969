/** Live round trip against the real annotation service: two scripted
 * annotators label ten sentences with one planted disagreement, the
 * adjudicator resolves it through the same client the browser uses, and the
 * dashboard numbers are checked against GET /progress. Skipped when the
 * Python package is not importable. */

import assert from "node:assert/strict";
import { spawn, spawnSync } from "node:child_process";
import { mkdtempSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";
import { test } from "node:test";

import { ApiClient } from "../src/api.js";
import { CardLoop } from "../src/state.js";
import { progressConsistent, progressRows } from "../src/state.js";

const SERVER_SCRIPT = `
import sys, time
from dtkit.corpus import Sentence
from dtkit.service import AnnotationService, ServiceConfig
sentences = [Sentence(f"s{i}", "F1", 2015, "MDA", i, f"sentence number {i}") for i in range(10)]
svc = AnnotationService(sentences, ServiceConfig(port=0, log_path=sys.argv[1]))
svc.start_background()
print(svc.base_url, flush=True)
while True:
    time.sleep(0.5)
`;

function pythonAvailable(): boolean {
  const probe = spawnSync("python3", ["-c", "import dtkit"], { timeout: 20000 });
  return probe.status === 0;
}

async function startService(): Promise<{ baseUrl: string; stop: () => void }> {
  const logPath = join(mkdtempSync(join(tmpdir(), "annot-")), "events.jsonl");
  const child = spawn("python3", ["-c", SERVER_SCRIPT, logPath], { stdio: ["ignore", "pipe", "inherit"] });
  const baseUrl = await new Promise<string>((resolve, reject) => {
    const timer = setTimeout(() => reject(new Error("service did not start")), 20000);
    child.stdout.once("data", (chunk) => {
      clearTimeout(timer);
      resolve(String(chunk).trim());
    });
    child.once("exit", () => reject(new Error("service exited early")));
  });
  return { baseUrl, stop: () => child.kill() };
}

test("scripted session: 9 agreements, 1 dispute, adjudication, dashboard parity", { skip: !pythonAvailable() }, async () => {
  const { baseUrl, stop } = await startService();
  try {
    const alice = new ApiClient({ baseUrl, annotator: "alice", role: "annotator" });
    const bob = new ApiClient({ baseUrl, annotator: "bob", role: "annotator" });
    const adjudicator = new ApiClient({ baseUrl, annotator: "judge", role: "adjudicator" });

    // alice labels everything AI through the same card loop the UI drives
    const aliceLoop = new CardLoop(alice);
    await aliceLoop.start();
    while (aliceLoop.state.kind === "card") {
      await aliceLoop.submit("AI");
    }
    assert.equal(aliceLoop.state.kind, "complete");

    // bob agrees everywhere except the planted disagreement on s3
    const bobLoop = new CardLoop(bob);
    await bobLoop.start();
    while (bobLoop.state.kind === "card") {
      const sid = bobLoop.state.card.sentence_id;
      await bobLoop.submit(sid === "s3" ? "NON_DIGITAL" : "AI");
    }
    assert.equal(bobLoop.state.kind, "complete");

    let progress = await adjudicator.progress();
    assert.equal(progress.agreed, 9);
    assert.equal(progress.disputed, 1);
    assert.ok(progressConsistent(progress));

    const disputes = await adjudicator.disputes();
    assert.equal(disputes.length, 1);
    assert.equal(disputes[0].sentence_id, "s3");
    assert.deepEqual([disputes[0].label_a, disputes[0].label_b].sort(), ["AI", "NON_DIGITAL"]);

    const outcome = await adjudicator.adjudicate("s3", "AI");
    assert.equal(outcome.status, "ADJUDICATED");

    progress = await adjudicator.progress();
    assert.equal(progress.adjudicated, 1);
    assert.equal(progress.disputed, 0);
    assert.equal(progress.agreed, 9);
    assert.equal(await adjudicator.disputes().then((d) => d.length), 0);

    // dashboard rows are a pure rendering of the progress body
    const rows = Object.fromEntries(progressRows(progress));
    assert.equal(rows["Total"], String(progress.total));
    assert.equal(rows["Agreed"], String(progress.agreed));
    assert.equal(rows["Adjudicated"], String(progress.adjudicated));
    assert.equal(rows["Excluded"], String(progress.excluded));
  } finally {
    stop();
  }
});
