/** End-to-end console flow against a running service.
 *
 * Start the service first, e.g.
 *   ebsopt serve --data <data-dir> --port 8321
 * then run  EBSOPT_SERVICE_URL=http://127.0.0.1:8321 npm run e2e
 * Skipped with a notice when the URL is not configured.
 */

import { describe, expect, it } from "vitest";

import { makeClient } from "../src/api.js";
import { pollJob } from "../src/poll.js";
import { markerLayer, solutionStocks, terminationBadge, timeline } from "../src/viewmodel.js";

const base = process.env.EBSOPT_SERVICE_URL;
const suite = base ? describe : describe.skip;

if (!base) {
  console.log("EBSOPT_SERVICE_URL not set; console e2e skipped");
}

suite("console against the live service", () => {
  it("submits the availability query, reaches a terminal timeline, and grows " +
     "the declared-spot markers from the historical to the solution layer",
     { timeout: 120_000 }, async () => {
    const client = makeClient(base!);
    const spots = await client.getSpots();
    expect(spots.length).toBeGreaterThan(2);

    const jobId = await client.submitQuery({
      text: "increase available e-bikes at spots 1 and 2",
      adapter: "mock",
      max_parameterized: Math.max(0, spots.length - 3),
    });
    const job = await pollJob(client, jobId, { intervalMs: 500 });

    expect(["done", "failed"]).toContain(job.status);
    expect(job.status).toBe("done");
    const rows = timeline(job);
    expect(rows.length).toBeGreaterThan(0);
    expect(terminationBadge(job).tone).not.toBe("busy");

    const before = markerLayer(spots);
    const after = markerLayer(spots, solutionStocks(job));
    // declared spots are 1-based labels in the query text: ids 0 and 1
    for (const id of [0, 1]) {
      const was = before.find((m) => m.id === id)!;
      const now = after.find((m) => m.id === id)!;
      expect(now.available).toBeGreaterThanOrEqual(was.available);
    }
    const grew = [0, 1].some((id) =>
      after.find((m) => m.id === id)!.available >
      before.find((m) => m.id === id)!.available);
    expect(grew).toBe(true);
  });
});
