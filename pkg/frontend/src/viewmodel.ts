/** Pure derivations from API payloads to view data.
 *
 * Every number displayed comes from a service response field; the console
 * never recomputes solutions. Marker size tracks the available count
 * (medium + high charge), marker shade the high-charge share.
 */

import type { JobPayload, SpotInfo, Stock, TraceIteration } from "./types.js";

export type Marker = {
  id: number;
  name: string;
  x: number;          // viewport fraction 0..1
  y: number;
  radius: number;     // pixels
  shade: number;      // 0 (light) .. 1 (dark)
  available: number;
  label: string;
};

const MIN_RADIUS = 3;
const MAX_RADIUS = 14;

export function available(stock: Stock): number {
  return stock.k2 + stock.k3;
}

export function highShare(stock: Stock): number {
  const total = stock.k1 + stock.k2 + stock.k3;
  return total > 0 ? stock.k3 / total : 0;
}

export function markerLayer(spots: SpotInfo[],
                            stocks?: Map<number, Stock>): Marker[] {
  if (spots.length === 0) {
    return [];
  }
  const lats = spots.map((s) => s.lat);
  const lons = spots.map((s) => s.lon);
  const latSpan = Math.max(Math.max(...lats) - Math.min(...lats), 1e-9);
  const lonSpan = Math.max(Math.max(...lons) - Math.min(...lons), 1e-9);
  const latMin = Math.min(...lats);
  const lonMin = Math.min(...lons);
  const maxAvail = Math.max(
    1, ...spots.map((s) => available(stocks?.get(s.id) ?? s.stock)));

  return spots.map((s) => {
    const stock = stocks?.get(s.id) ?? s.stock;
    const avail = available(stock);
    return {
      id: s.id,
      name: s.name,
      x: (s.lon - lonMin) / lonSpan,
      y: 1 - (s.lat - latMin) / latSpan,
      radius: MIN_RADIUS + (MAX_RADIUS - MIN_RADIUS) * (avail / maxAvail),
      shade: highShare(stock),
      available: avail,
      label: `${s.name}: ${avail} available (${stock.k3} high charge)`,
    };
  });
}

export function solutionStocks(job: JobPayload): Map<number, Stock> {
  const out = new Map<number, Stock>();
  for (const [spot, decision] of Object.entries(job.decisions ?? {})) {
    out.set(Number(spot), decision.stock);
  }
  return out;
}

export type TimelineRow = {
  t: number;
  satisfaction: string;
  cost: string;
  qr: string;
  freeSpots: number;
  pinned: number;
  solverStatus: string;
};

export function timeline(job: JobPayload): TimelineRow[] {
  const iterations: TraceIteration[] = job.trace?.iterations ?? [];
  return iterations.map((it) => ({
    t: it.t,
    satisfaction: it.satisfaction_sentinel
      ? "baseline zero"
      : formatSigned(it.satisfaction ?? 0),
    cost: it.cost_objective.toFixed(2),
    qr: it.qr_objective.toFixed(2),
    freeSpots: it.free_spots.length,
    pinned: it.parameterized.length,
    solverStatus: it.solver_status,
  }));
}

export function terminationBadge(job: JobPayload): { label: string; tone: string } {
  if (job.status === "failed") {
    return { label: `failed: ${job.reason ?? "unknown"}`, tone: "bad" };
  }
  if (job.status !== "done") {
    const suffix = job.iteration ? ` (iteration ${job.iteration})` : "";
    return { label: `${job.status}${suffix}`, tone: "busy" };
  }
  switch (job.agent_status) {
    case "satisfied":
      return { label: "satisfied", tone: "good" };
    case "no-improvement":
      return { label: "no improvement over history", tone: "flat" };
    case "max-iterations":
      return { label: "iteration budget reached", tone: "flat" };
    case "unmatched":
      return { label: "no matching domain", tone: "bad" };
    default:
      return { label: job.agent_status ?? "done", tone: "flat" };
  }
}

export function formatSigned(value: number): string {
  const pct = 100 * value;
  return `${pct >= 0 ? "+" : ""}${pct.toFixed(2)}%`;
}
