/** Thin typed client over the service endpoints. */

import type { JobPayload, QueryRequest, SpotInfo } from "./types.js";

export class ApiError extends Error {
  constructor(public status: number, detail: string) {
    super(detail);
  }
}

async function parseOrThrow(response: Response): Promise<unknown> {
  const body = await response.json().catch(() => ({}));
  if (!response.ok) {
    const detail =
      typeof body === "object" && body !== null && "detail" in body
        ? String((body as { detail: unknown }).detail)
        : `HTTP ${response.status}`;
    throw new ApiError(response.status, detail);
  }
  return body;
}

export function makeClient(baseUrl = "", fetcher: typeof fetch = fetch) {
  return {
    async submitQuery(request: QueryRequest): Promise<string> {
      const response = await fetcher(`${baseUrl}/api/queries`, {
        method: "POST",
        headers: { "Content-Type": "application/json" },
        body: JSON.stringify(request),
      });
      const body = (await parseOrThrow(response)) as { job_id: string };
      return body.job_id;
    },

    async getJob(jobId: string): Promise<JobPayload> {
      const response = await fetcher(`${baseUrl}/api/jobs/${jobId}`);
      return (await parseOrThrow(response)) as JobPayload;
    },

    async getSpots(): Promise<SpotInfo[]> {
      const response = await fetcher(`${baseUrl}/api/spots`);
      return (await parseOrThrow(response)) as SpotInfo[];
    },
  };
}

export type Client = ReturnType<typeof makeClient>;
