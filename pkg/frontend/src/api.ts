// Thin fetch wrapper around the campaign service. Every helper returns the
// parsed JSON payload or throws ApiError carrying the HTTP status and the
// server's detail message, so the UI can turn 409/422 into guidance.

import type { CampaignSnapshot, IterationRecord, JobHandle, SampleRow } from "./types.js";

export class ApiError extends Error {
  status: number;
  detail: string;

  constructor(status: number, detail: string) {
    super(`HTTP ${status}: ${detail}`);
    this.status = status;
    this.detail = detail;
  }
}

async function request<T>(base: string, path: string, init?: RequestInit): Promise<T> {
  const response = await fetch(`${base}/api/v1${path}`, {
    headers: { "content-type": "application/json" },
    ...init,
  });
  const text = await response.text();
  let body: unknown = null;
  try {
    body = text ? JSON.parse(text) : null;
  } catch {
    body = text;
  }
  if (!response.ok) {
    const detail =
      body && typeof body === "object" && "detail" in (body as Record<string, unknown>)
        ? String((body as Record<string, unknown>).detail)
        : String(body);
    throw new ApiError(response.status, detail);
  }
  return body as T;
}

export class CampaignClient {
  constructor(readonly base: string, readonly id: string) {}

  static async create(base: string, config: Record<string, unknown>): Promise<CampaignClient> {
    const body = await request<{ id: string }>(base, "/campaigns", {
      method: "POST",
      body: JSON.stringify(config),
    });
    return new CampaignClient(base, body.id);
  }

  state(): Promise<CampaignSnapshot> {
    return request(this.base, `/campaigns/${this.id}/state`);
  }

  history(): Promise<{ records: IterationRecord[] }> {
    return request(this.base, `/campaigns/${this.id}/history`);
  }

  samples(): Promise<{ samples: SampleRow[] }> {
    return request(this.base, `/campaigns/${this.id}/samples`);
  }

  step(): Promise<JobHandle> {
    return request(this.base, `/campaigns/${this.id}/step`, { method: "POST" });
  }

  job(jobId: string): Promise<JobHandle> {
    return request(this.base, `/campaigns/${this.id}/jobs/${jobId}`);
  }

  submitObservations(rows: number[][]): Promise<{ accepted: boolean }> {
    return request(this.base, `/campaigns/${this.id}/observations`, {
      method: "POST",
      body: JSON.stringify({ observations: rows }),
    });
  }

  async waitForJob(jobId: string, pollMs = 250, timeoutMs = 600_000): Promise<JobHandle> {
    const deadline = Date.now() + timeoutMs;
    for (;;) {
      const job = await this.job(jobId);
      if (job.status === "done" || job.status === "error") return job;
      if (Date.now() > deadline) throw new Error(`job ${jobId} timed out`);
      await new Promise((resolve) => setTimeout(resolve, pollMs));
    }
  }
}
