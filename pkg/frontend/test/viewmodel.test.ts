import { describe, expect, it } from "vitest";

import {
  available, formatSigned, highShare, markerLayer, solutionStocks,
  terminationBadge, timeline,
} from "../src/viewmodel.js";
import type { JobPayload, SpotInfo } from "../src/types.js";

const spots: SpotInfo[] = [
  { id: 0, name: "A", lat: 47.60, lon: -122.33, capacity: 8,
    stock: { k1: 1, k2: 2, k3: 3 } },
  { id: 1, name: "B", lat: 47.61, lon: -122.32, capacity: 8,
    stock: { k1: 0, k2: 0, k3: 0 } },
  { id: 2, name: "C", lat: 47.62, lon: -122.31, capacity: 8,
    stock: { k1: 0, k2: 0, k3: 6 } },
];

describe("stock derivations", () => {
  it("available counts medium plus high charge", () => {
    expect(available({ k1: 4, k2: 2, k3: 3 })).toBe(5);
  });

  it("high share handles empty stock", () => {
    expect(highShare({ k1: 0, k2: 0, k3: 0 })).toBe(0);
    expect(highShare({ k1: 0, k2: 0, k3: 6 })).toBe(1);
  });
});

describe("marker layer", () => {
  it("all-zero stock gives uniform minimal markers", () => {
    const zeroed = spots.map((s) => ({ ...s, stock: { k1: 0, k2: 0, k3: 0 } }));
    const markers = markerLayer(zeroed);
    expect(new Set(markers.map((m) => m.radius)).size).toBe(1);
    expect(Math.min(...markers.map((m) => m.radius))).toBeGreaterThan(0);
    expect(markers.every((m) => m.shade === 0)).toBe(true);
  });

  it("the all-high-charge spot gets the darkest, largest marker", () => {
    const markers = markerLayer(spots);
    const c = markers.find((m) => m.id === 2)!;
    expect(c.shade).toBe(1);
    expect(Math.max(...markers.map((m) => m.radius))).toBe(c.radius);
  });

  it("positions are normalized into the unit square", () => {
    for (const m of markerLayer(spots)) {
      expect(m.x).toBeGreaterThanOrEqual(0);
      expect(m.x).toBeLessThanOrEqual(1);
      expect(m.y).toBeGreaterThanOrEqual(0);
      expect(m.y).toBeLessThanOrEqual(1);
    }
  });

  it("solution stocks override the historical layer", () => {
    const job = {
      status: "done",
      decisions: { "1": { swaps: { k1: 0, k2: 0 },
                          moves: { k1: 0, k2: 0, k3: 4 },
                          stock: { k1: 0, k2: 1, k3: 4 } } },
    } as unknown as JobPayload;
    const overlay = markerLayer(spots, solutionStocks(job));
    const before = markerLayer(spots);
    const grown = overlay.find((m) => m.id === 1)!;
    const was = before.find((m) => m.id === 1)!;
    expect(grown.available).toBe(5);
    expect(grown.radius).toBeGreaterThan(was.radius);
  });
});

describe("timeline and badges", () => {
  const doneJob: JobPayload = {
    id: "j1",
    status: "done",
    query: "q",
    agent_status: "satisfied",
    trace: {
      final_status: "satisfied",
      canonical_key: "k",
      qr_text: "maximize ...",
      baseline: 10,
      iterations: [
        { t: 1, free_spots: [0, 1], parameterized: [2], satisfaction: 0.12,
          satisfaction_sentinel: false, cost_objective: 3.5, qr_objective: 12,
          solver_status: "optimal", wall_time: 0.2, free_decisions: 10 },
      ],
    },
  };

  it("one iteration renders one row", () => {
    const rows = timeline(doneJob);
    expect(rows).toHaveLength(1);
    expect(rows[0].satisfaction).toBe("+12.00%");
    expect(rows[0].pinned).toBe(1);
  });

  it("streak-terminated jobs get the satisfied badge", () => {
    expect(terminationBadge(doneJob)).toEqual({ label: "satisfied", tone: "good" });
  });

  it("failed jobs surface the reason banner", () => {
    const failed = { id: "x", status: "failed", query: "q",
                     reason: "boom" } as JobPayload;
    expect(terminationBadge(failed).label).toContain("boom");
    expect(terminationBadge(failed).tone).toBe("bad");
  });

  it("running jobs show the current iteration", () => {
    const running = { id: "x", status: "running", query: "q",
                      iteration: 3 } as JobPayload;
    expect(terminationBadge(running).label).toBe("running (iteration 3)");
  });

  it("sentinel satisfaction renders distinctly", () => {
    const job = JSON.parse(JSON.stringify(doneJob)) as JobPayload;
    job.trace!.iterations[0].satisfaction = null;
    job.trace!.iterations[0].satisfaction_sentinel = true;
    expect(timeline(job)[0].satisfaction).toBe("baseline zero");
  });

  it("signed formatting", () => {
    expect(formatSigned(0.0408)).toBe("+4.08%");
    expect(formatSigned(-0.037)).toBe("-3.70%");
  });
});
