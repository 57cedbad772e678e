// Typed client for the answering service's HTTP/JSON API. All reward and
// ranking decisions happen server side; this module only moves payloads.

export interface Candidate {
  id: string;
  label: string;
  score: number;
}

export interface ContextEntity {
  id: string;
  label: string;
}

export interface TurnPayload {
  answer: Candidate | null;
  candidates: Candidate[];
  contextEntities: ContextEntity[];
  modelVersion: number;
  rewardAppliedToPrevTurn: number | null;
}

export interface PolicyStats {
  modelVersion: number;
  updatesApplied: number;
  queueLen: number;
  meanRecentReward: number;
  missCounts: Record<string, number>;
}

export class ServiceError extends Error {
  constructor(readonly status: number, message: string) {
    super(message);
    this.name = "ServiceError";
  }
}

// Method surface the UI depends on; tests substitute scripted doubles.
export interface ServiceApi {
  createSession(): Promise<string>;
  sendUtterance(
    sessionId: string,
    text: string,
    newConversation: boolean,
  ): Promise<TurnPayload>;
  resetSession(sessionId: string): Promise<void>;
  policyStats(): Promise<PolicyStats>;
}

async function request<T>(path: string, init?: RequestInit): Promise<T> {
  const res = await fetch(path, init);
  if (!res.ok) {
    let detail = `HTTP ${res.status}`;
    try {
      const doc = await res.json();
      if (doc && typeof doc.detail === "string") detail = doc.detail;
    } catch {
      // keep the generic detail when the error body is not JSON
    }
    throw new ServiceError(res.status, detail);
  }
  return res.json() as Promise<T>;
}

export class ApiClient implements ServiceApi {
  constructor(private readonly base: string = "") {}

  async createSession(): Promise<string> {
    const doc = await request<{ sessionId: string }>(`${this.base}/session`, {
      method: "POST",
    });
    return doc.sessionId;
  }

  sendUtterance(
    sessionId: string,
    text: string,
    newConversation: boolean,
  ): Promise<TurnPayload> {
    return request<TurnPayload>(`${this.base}/session/${sessionId}/utterance`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ text, newConversation }),
    });
  }

  async resetSession(sessionId: string): Promise<void> {
    await request<{ ok: boolean }>(`${this.base}/session/${sessionId}/reset`, {
      method: "POST",
    });
  }

  policyStats(): Promise<PolicyStats> {
    return request<PolicyStats>(`${this.base}/policy/stats`);
  }
}
