/** Typed client for the session service. All state shown by the UI comes
 * from these payloads verbatim; the client never simulates anything. */

export type Pair = [number, number];

export interface SessionState {
  v: number;
  id: string;
  step_index: number;
  agents: number[];
  inputs: number[] | null;
  enabled: Pair[];
  enabled_outcomes: number[];
  terminal: boolean;
  agent_count: number;
  legitimacy: Record<string, boolean>;
  node_count: number;
  interactions: Pair[];
  protocol: string;
}

export interface ApiErrorBody {
  v: number;
  code: string;
  detail: string;
}

export class ApiError extends Error {
  constructor(public status: number, public code: string, detail: string) {
    super(detail || code);
  }
}

export interface SessionRequest {
  topology: string | object;
  protocol: string;
  oracle?: { kind: string; k?: number } | null;
  initial?: number[] | "random";
  seed?: number;
  max_steps?: number;
}

async function parse(res: Response): Promise<any> {
  const text = await res.text();
  let body: any = {};
  try {
    body = text ? JSON.parse(text) : {};
  } catch {
    body = { code: "BAD_RESPONSE", detail: text };
  }
  if (!res.ok) {
    throw new ApiError(res.status, body.code ?? "HTTP_ERROR", body.detail ?? res.statusText);
  }
  return body;
}

export class SessionApi {
  constructor(private baseUrl: string = "") {}

  private url(path: string): string {
    return `${this.baseUrl}${path}`;
  }

  async createSession(req: SessionRequest): Promise<SessionState> {
    const res = await fetch(this.url("/sessions"), {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(req),
    });
    return parse(res);
  }

  async getState(id: string): Promise<SessionState> {
    return parse(await fetch(this.url(`/sessions/${id}`)));
  }

  async step(id: string, pair: Pair, outcomeChoice?: number): Promise<SessionState> {
    const body: any = { pair };
    if (outcomeChoice !== undefined) body.outcome_choice = outcomeChoice;
    const res = await fetch(this.url(`/sessions/${id}/step`), {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(body),
    });
    return parse(res);
  }

  async fault(id: string, node: number, hasAgent: boolean): Promise<SessionState> {
    const res = await fetch(this.url(`/sessions/${id}/fault`), {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({ node, has_agent: hasAgent }),
    });
    return parse(res);
  }

  async overrideOracle(id: string, req: { node: number; value: boolean } | { clear: true }): Promise<SessionState> {
    const res = await fetch(this.url(`/sessions/${id}/oracle-override`), {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(req),
    });
    return parse(res);
  }

  async trace(id: string): Promise<string> {
    const res = await fetch(this.url(`/sessions/${id}/trace`));
    if (!res.ok) throw new ApiError(res.status, "HTTP_ERROR", res.statusText);
    return res.text();
  }
}
