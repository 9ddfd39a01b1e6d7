/** Payload shapes of the service API the console consumes. */

export type Stock = { k1: number; k2: number; k3: number };

export type SpotInfo = {
  id: number;
  name: string;
  lat: number;
  lon: number;
  capacity: number;
  stock: Stock;
};

export type SpotDecision = {
  swaps: { k1: number; k2: number };
  moves: Stock;
  stock: Stock;
};

export type TraceIteration = {
  t: number;
  free_spots: number[];
  parameterized: number[];
  satisfaction: number | null;
  satisfaction_sentinel: boolean;
  cost_objective: number;
  qr_objective: number;
  solver_status: string;
  wall_time: number;
  free_decisions: number;
};

export type JobPayload = {
  id: string;
  status: "queued" | "running" | "done" | "failed";
  query: string;
  iteration?: number;
  reason?: string;
  agent_status?: string;
  satisfaction?: number | null;
  satisfaction_sentinel?: boolean;
  cost_objective?: number | null;
  qr_objective?: number | null;
  qr_text?: string;
  decisions?: Record<string, SpotDecision>;
  explanation?: string;
  metrics?: {
    locality: number | null;
    iterations: number;
    solver_invocations: number;
    wall_time: number;
  };
  trace?: {
    final_status: string;
    canonical_key: string;
    qr_text: string;
    baseline: number;
    iterations: TraceIteration[];
  };
};

export type QueryRequest = {
  text: string;
  declared_spots?: number[];
  max_parameterized?: number;
  adapter?: "mock" | "live";
  idempotency_key?: string;
};
