/** Typed HTTP client for the gateway API. */

import type {
  AssignmentView,
  PairView,
  RegisteredWorker,
  VerdictAck,
  VerdictPayload,
} from "./types.js";

export type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

/** A structured error response from the gateway (4xx with an error code). */
export class GatewayError extends Error {
  constructor(
    readonly status: number,
    readonly code: string,
    detail?: string,
  ) {
    super(detail ?? code);
    this.name = "GatewayError";
  }
}

async function parseError(response: Response): Promise<GatewayError> {
  let code = "unknown_error";
  let detail: string | undefined;
  try {
    const body = (await response.json()) as { error?: string; detail?: string };
    if (typeof body.error === "string") code = body.error;
    if (typeof body.detail === "string") detail = body.detail;
  } catch {
    // non-JSON error body: keep the generic code
  }
  return new GatewayError(response.status, code, detail);
}

export class GatewayClient {
  constructor(
    private readonly baseUrl: string,
    private readonly fetchImpl: FetchLike = ((input, init) =>
      fetch(input, init)) as FetchLike,
  ) {}

  private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
    const init: RequestInit = { method };
    if (body !== undefined) {
      init.headers = { "content-type": "application/json" };
      init.body = JSON.stringify(body);
    }
    const response = await this.fetchImpl(this.baseUrl + path, init);
    if (!response.ok) {
      throw await parseError(response);
    }
    return (await response.json()) as T;
  }

  register(selfIdentifiedRace: string, priorExperience = false): Promise<RegisteredWorker> {
    return this.request<RegisteredWorker>("POST", "/api/workers", {
      self_identified_race: selfIdentifiedRace,
      prior_experience: priorExperience,
    });
  }

  claim(workerId: string, experimentId: string): Promise<AssignmentView> {
    return this.request<AssignmentView>("POST", "/api/assignments/claim", {
      worker_id: workerId,
      experiment_id: experimentId,
    });
  }

  pair(pairId: string): Promise<PairView> {
    return this.request<PairView>("GET", `/api/pairs/${encodeURIComponent(pairId)}`);
  }

  submit(payload: VerdictPayload): Promise<VerdictAck> {
    return this.request<VerdictAck>("POST", "/api/verdicts", payload);
  }
}
