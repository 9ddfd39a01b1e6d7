/** Console wiring: submit queries, watch the iteration timeline, compare
 * the historical map layer against the solution layer. */

import { ApiError, makeClient } from "./api.js";
import { pollJob } from "./poll.js";
import { renderMap } from "./map.js";
import {
  markerLayer, solutionStocks, terminationBadge, timeline,
} from "./viewmodel.js";
import type { JobPayload, SpotInfo } from "./types.js";

const client = makeClient("");

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) {
    throw new Error(`missing element #${id}`);
  }
  return node as T;
}

let roster: SpotInfo[] = [];
let lastJob: JobPayload | null = null;
let layer: "history" | "solution" = "history";

function declaredSpots(job: JobPayload | null): Set<number> {
  const free = job?.trace?.iterations?.at(-1)?.free_spots ?? [];
  return new Set(free);
}

function redraw(): void {
  const svg = el<HTMLElement>("map") as unknown as SVGSVGElement;
  if (roster.length === 0) {
    return;
  }
  const stocks = layer === "solution" && lastJob
    ? solutionStocks(lastJob)
    : undefined;
  renderMap(svg, markerLayer(roster, stocks), declaredSpots(lastJob));
  el("layer-label").textContent =
    layer === "solution" ? "solution stock" : "historical stock";
}

function showJob(job: JobPayload): void {
  lastJob = job;
  const badge = terminationBadge(job);
  const badgeEl = el("badge");
  badgeEl.textContent = badge.label;
  badgeEl.className = `badge ${badge.tone}`;

  const rows = timeline(job);
  el("timeline").innerHTML = rows.length
    ? rows.map((r) =>
        `<tr><td>${r.t}</td><td>${r.satisfaction}</td><td>${r.cost}</td>` +
        `<td>${r.qr}</td><td>${r.freeSpots}</td><td>${r.pinned}</td>` +
        `<td>${r.solverStatus}</td></tr>`).join("")
    : "<tr><td colspan=7>no iterations yet</td></tr>";

  el("objective").textContent = job.qr_text ?? "";
  el("canonical").textContent = job.trace?.canonical_key ?? "";
  el("explanation").textContent = job.explanation ?? job.reason ?? "";
  redraw();
}

async function submit(event: Event): Promise<void> {
  event.preventDefault();
  const text = (el<HTMLInputElement>("query")).value;
  const capRaw = (el<HTMLInputElement>("cap")).value;
  const errorEl = el("form-error");
  errorEl.textContent = "";
  try {
    const jobId = await client.submitQuery({
      text,
      max_parameterized: capRaw ? Number(capRaw) : undefined,
      adapter: "mock",
    });
    el("job-id").textContent = jobId;
    const job = await pollJob(client, jobId, { intervalMs: 1000, onUpdate: showJob });
    showJob(job);
    layer = "solution";
    redraw();
  } catch (err) {
    if (err instanceof ApiError) {
      errorEl.textContent = `rejected: ${err.message}`;
    } else {
      errorEl.textContent = String(err);
    }
  }
}

export async function start(): Promise<void> {
  roster = await client.getSpots();
  const slider = el<HTMLInputElement>("cap");
  slider.max = String(roster.length);
  redraw();
  el("query-form").addEventListener("submit", submit);
  el("layer-toggle").addEventListener("click", () => {
    layer = layer === "history" ? "solution" : "history";
    redraw();
  });
}

if (typeof document !== "undefined" && document.getElementById("query-form")) {
  start().catch((err) => {
    el("form-error").textContent = `service unavailable: ${err}`;
  });
}
