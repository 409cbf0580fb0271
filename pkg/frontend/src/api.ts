/** Typed client for the run API. What-if probes cancel-supersede: firing a
 * new probe aborts the previous in-flight request. */

import {
  CurveResponse,
  GridResponse,
  RunMeta,
  WhatIfRequest,
  WhatIfResponse,
} from "./types.js";

export class ApiError extends Error {
  constructor(
    readonly status: number,
    message: string,
  ) {
    super(message);
  }
}

async function asJson<T>(response: Response): Promise<T> {
  if (!response.ok) {
    let detail = response.statusText;
    try {
      const body = await response.json();
      if (body && typeof body.detail === "string") detail = body.detail;
    } catch {
      // keep the status text
    }
    throw new ApiError(response.status, detail);
  }
  return (await response.json()) as T;
}

export class ApiClient {
  private probeController: AbortController | null = null;

  constructor(private readonly base: string = "") {}

  async meta(): Promise<RunMeta> {
    return asJson<RunMeta>(await fetch(`${this.base}/run/meta`));
  }

  async grid(family: string): Promise<GridResponse> {
    const params = new URLSearchParams({ family });
    return asJson<GridResponse>(await fetch(`${this.base}/grid?${params}`));
  }

  async curve(mu: number): Promise<CurveResponse> {
    const params = new URLSearchParams({ mu: String(mu) });
    return asJson<CurveResponse>(await fetch(`${this.base}/curve?${params}`));
  }

  /** POST /whatif; any previous in-flight probe is aborted. */
  async whatif(body: WhatIfRequest): Promise<WhatIfResponse> {
    this.probeController?.abort();
    const controller = new AbortController();
    this.probeController = controller;
    const response = await fetch(`${this.base}/whatif`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(body),
      signal: controller.signal,
    });
    return asJson<WhatIfResponse>(response);
  }
}
