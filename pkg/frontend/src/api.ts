/**
 * Typed client for the irforge service.
 *
 * Every mutation POSTs the command and then re-fetches the session, so the
 * caller only ever sees server-confirmed state.
 */

import type { ActionItem, DebriefReport, MeasureScore, SessionView } from "./types";

export class ApiError extends Error {
  readonly status: number;
  readonly code: string;
  readonly detail: string;

  constructor(status: number, code: string, detail: string) {
    super(`${code}: ${detail}`);
    this.status = status;
    this.code = code;
    this.detail = detail;
  }
}

async function parseError(response: Response): Promise<ApiError> {
  let code = "http-error";
  let detail = response.statusText;
  try {
    const body = await response.json();
    if (body && typeof body.error === "string") {
      code = body.error;
      detail = body.detail ?? detail;
    }
  } catch {
    // non-JSON error body; keep the status text
  }
  return new ApiError(response.status, code, detail);
}

export class ForgeApi {
  readonly baseUrl: string;

  constructor(baseUrl: string) {
    this.baseUrl = baseUrl.replace(/\/$/, "");
  }

  private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
    const response = await fetch(this.baseUrl + path, {
      method,
      headers: body === undefined ? undefined : { "content-type": "application/json" },
      body: body === undefined ? undefined : JSON.stringify(body),
    });
    if (!response.ok) {
      throw await parseError(response);
    }
    return (await response.json()) as T;
  }

  getSession(sessionId: string): Promise<SessionView> {
    return this.request("GET", `/sessions/${sessionId}`);
  }

  createSession(scenarioId: string, roster: string[]): Promise<SessionView> {
    return this.request("POST", "/sessions", { scenario_id: scenarioId, roster });
  }

  /** POST a mutation, then return the re-fetched (confirmed) session view. */
  private async mutate(sessionId: string, path: string, body?: unknown): Promise<SessionView> {
    await this.request("POST", path, body);
    return this.getSession(sessionId);
  }

  advance(sessionId: string): Promise<SessionView> {
    return this.mutate(sessionId, `/sessions/${sessionId}/advance`, {});
  }

  fireInject(sessionId: string, injectId: string): Promise<SessionView> {
    return this.mutate(sessionId, `/sessions/${sessionId}/injects/${injectId}`, {});
  }

  recordResponse(
    sessionId: string,
    questionId: string,
    respondent: string,
    text: string,
  ): Promise<SessionView> {
    return this.mutate(sessionId, `/sessions/${sessionId}/responses`, {
      question_id: questionId,
      respondent,
      text,
    });
  }

  submitScores(sessionId: string, scores: MeasureScore[]): Promise<SessionView> {
    return this.mutate(sessionId, `/sessions/${sessionId}/scores`, scores);
  }

  async submitActionItems(sessionId: string, items: ActionItem[]): Promise<SessionView> {
    await this.request("POST", `/sessions/${sessionId}/debrief`, { action_items: items });
    return this.getSession(sessionId);
  }

  getDebrief(sessionId: string): Promise<DebriefReport> {
    return this.request("GET", `/sessions/${sessionId}/debrief`);
  }

  /** Raw debrief bytes, exactly as the service sent them (for export). */
  async getDebriefRaw(sessionId: string): Promise<string> {
    const response = await fetch(`${this.baseUrl}/sessions/${sessionId}/debrief`);
    if (!response.ok) {
      throw await parseError(response);
    }
    return response.text();
  }
}
