/**
 * Thin /v1 client. At most one what-if batch is in flight: a newer
 * submission aborts the previous one. In dev mode every exchange is pushed
 * onto a request log so each rendered number can be traced to a response.
 */
import type { FeatureMap, ModelInfo, WhatIfResponse } from "./types";

export interface RequestLogEntry {
  method: string;
  url: string;
  body?: unknown;
  status: number | "network-error" | "aborted";
  response?: unknown;
}

export class ApiError extends Error {
  constructor(
    public status: number,
    public detail: string,
  ) {
    super(`HTTP ${status}: ${detail}`);
  }
}

export class ApiClient {
  private inflight: AbortController | null = null;
  readonly requestLog: RequestLogEntry[] = [];

  constructor(
    private baseUrl: string = "",
    private fetchImpl: typeof fetch = fetch,
    private logRequests: boolean = false,
  ) {}

  private log(entry: RequestLogEntry): void {
    if (this.logRequests) {
      this.requestLog.push(entry);
    }
  }

  async getModel(): Promise<ModelInfo> {
    const url = `${this.baseUrl}/v1/model`;
    const response = await this.fetchImpl(url);
    const body = await response.json();
    this.log({ method: "GET", url, status: response.status, response: body });
    if (!response.ok) {
      throw new ApiError(response.status, body.detail ?? "model unavailable");
    }
    return body as ModelInfo;
  }

  /**
   * Submit one what-if batch; any batch still in flight is aborted first.
   * Returns null when this call itself was aborted by a newer submission.
   */
  async whatif(
    stage: string,
    base: FeatureMap,
    perturbations: FeatureMap[],
  ): Promise<WhatIfResponse | null> {
    this.inflight?.abort();
    const controller = new AbortController();
    this.inflight = controller;
    const url = `${this.baseUrl}/v1/whatif`;
    const payload = { base: { stage, features: base }, perturbations };
    let response: Response;
    try {
      response = await this.fetchImpl(url, {
        method: "POST",
        headers: { "content-type": "application/json" },
        body: JSON.stringify(payload),
        signal: controller.signal,
      });
    } catch (err) {
      if (controller.signal.aborted) {
        this.log({ method: "POST", url, body: payload, status: "aborted" });
        return null;
      }
      this.log({ method: "POST", url, body: payload, status: "network-error" });
      throw err;
    } finally {
      if (this.inflight === controller) {
        this.inflight = null;
      }
    }
    const body = await response.json();
    this.log({ method: "POST", url, body: payload, status: response.status, response: body });
    if (!response.ok) {
      throw new ApiError(response.status, body.detail ?? "what-if failed");
    }
    return body as WhatIfResponse;
  }
}
