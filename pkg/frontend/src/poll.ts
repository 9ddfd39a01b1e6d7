/** Poll a job until it reaches a terminal state.
 *
 * Concurrent polls for the same job id are deduplicated: callers share one
 * in-flight loop per id, so re-renders never multiply the request rate.
 */

import type { Client } from "./api.js";
import type { JobPayload } from "./types.js";

const TERMINAL = new Set(["done", "failed"]);

const inFlight = new Map<string, Promise<JobPayload>>();

export type PollOptions = {
  intervalMs?: number;
  timeoutMs?: number;
  onUpdate?: (job: JobPayload) => void;
  sleeper?: (ms: number) => Promise<void>;
};

const defaultSleep = (ms: number) => new Promise<void>((r) => setTimeout(r, ms));

export function activePolls(): number {
  return inFlight.size;
}

export function pollJob(client: Client, jobId: string,
                        options: PollOptions = {}): Promise<JobPayload> {
  const existing = inFlight.get(jobId);
  if (existing) {
    return existing;
  }
  const intervalMs = options.intervalMs ?? 1000;
  const timeoutMs = options.timeoutMs ?? 15 * 60 * 1000;
  const sleep = options.sleeper ?? defaultSleep;

  const loop = (async () => {
    const started = Date.now();
    for (;;) {
      const job = await client.getJob(jobId);
      options.onUpdate?.(job);
      if (TERMINAL.has(job.status)) {
        return job;
      }
      if (Date.now() - started > timeoutMs) {
        throw new Error(`job ${jobId} still ${job.status} after ${timeoutMs} ms`);
      }
      await sleep(intervalMs);
    }
  })();
  const tracked = loop.finally(() => inFlight.delete(jobId));
  inFlight.set(jobId, tracked);
  return tracked;
}
