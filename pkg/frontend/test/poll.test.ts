import { describe, expect, it } from "vitest";

import { activePolls, pollJob } from "../src/poll.js";
import type { Client } from "../src/api.js";
import type { JobPayload } from "../src/types.js";

function scriptedClient(statuses: JobPayload["status"][]): { client: Client; calls: () => number } {
  let i = 0;
  const client = {
    getJob: async (id: string) => {
      const status = statuses[Math.min(i, statuses.length - 1)];
      i += 1;
      return { id, status, query: "q" } as JobPayload;
    },
    submitQuery: async () => "x",
    getSpots: async () => [],
  } as unknown as Client;
  return { client, calls: () => i };
}

const instant = () => Promise.resolve();

describe("pollJob", () => {
  it("resolves on the terminal state", async () => {
    const { client, calls } = scriptedClient(["queued", "running", "running", "done"]);
    const job = await pollJob(client, "a", { sleeper: instant, intervalMs: 1 });
    expect(job.status).toBe("done");
    expect(calls()).toBe(4);
  });

  it("rejects when the job fails", async () => {
    const { client } = scriptedClient(["running", "failed"]);
    const job = await pollJob(client, "b", { sleeper: instant });
    expect(job.status).toBe("failed");
  });

  it("dedupes concurrent polls per job id", async () => {
    const { client, calls } = scriptedClient(["running", "running", "done"]);
    const [first, second] = await Promise.all([
      pollJob(client, "c", { sleeper: instant }),
      pollJob(client, "c", { sleeper: instant }),
    ]);
    expect(first).toBe(second);
    expect(calls()).toBe(3);   // one shared loop, not two
    expect(activePolls()).toBe(0);
  });

  it("separate ids poll independently", async () => {
    const a = scriptedClient(["done"]);
    const b = scriptedClient(["done"]);
    await Promise.all([
      pollJob(a.client, "d", { sleeper: instant }),
      pollJob(b.client, "e", { sleeper: instant }),
    ]);
    expect(a.calls()).toBe(1);
    expect(b.calls()).toBe(1);
  });

  it("times out on jobs stuck forever", async () => {
    const { client } = scriptedClient(["running"]);
    await expect(
      pollJob(client, "f", { sleeper: instant, timeoutMs: -1 }),
    ).rejects.toThrow(/still running/);
  });
});
