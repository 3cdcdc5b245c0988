/**
 * Session console controller: holds the last server-confirmed view and
 * re-renders after every confirmed command. Commands run sequentially;
 * failures surface as a banner and never change the displayed state.
 */

import { ApiError, ForgeApi } from "./api";
import { debriefText, renderSession } from "./render";
import type { ActionItem, DebriefReport, MeasureScore, SessionView } from "./types";

export interface DebriefExport {
  /** Raw service bytes of GET /sessions/{id}/debrief. */
  json: string;
  /** Human-readable rendering of the same payload. */
  text: string;
}

export class SessionConsole {
  readonly api: ForgeApi;
  readonly sessionId: string;
  view: SessionView | null = null;
  report: DebriefReport | null = null;
  banner: string | null = null;
  private readonly onChange: (html: string) => void;

  constructor(api: ForgeApi, sessionId: string, onChange: (html: string) => void) {
    this.api = api;
    this.sessionId = sessionId;
    this.onChange = onChange;
  }

  html(): string {
    if (!this.view) {
      return `<p class="hint">loading session…</p>`;
    }
    return renderSession(this.view, this.banner, this.report);
  }

  private render(): void {
    this.onChange(this.html());
  }

  private async accept(view: SessionView): Promise<void> {
    this.view = view;
    this.banner = null;
    if (view.state === "debrief" || view.state === "closed") {
      this.report = await this.api.getDebrief(this.sessionId);
    } else {
      this.report = null;
    }
    this.render();
  }

  private fail(error: unknown): void {
    this.banner =
      error instanceof ApiError
        ? `${error.code}: ${error.detail}`
        : `unexpected error: ${String(error)}`;
    this.render();
  }

  async load(): Promise<void> {
    try {
      await this.accept(await this.api.getSession(this.sessionId));
    } catch (error) {
      this.fail(error);
    }
  }

  async advance(): Promise<void> {
    try {
      await this.accept(await this.api.advance(this.sessionId));
    } catch (error) {
      this.fail(error);
    }
  }

  async fireInject(injectId: string): Promise<void> {
    try {
      await this.accept(await this.api.fireInject(this.sessionId, injectId));
    } catch (error) {
      this.fail(error);
    }
  }

  async submitResponse(questionId: string, respondent: string, text: string): Promise<void> {
    try {
      await this.accept(
        await this.api.recordResponse(this.sessionId, questionId, respondent, text),
      );
    } catch (error) {
      this.fail(error);
    }
  }

  async saveScores(scores: MeasureScore[]): Promise<void> {
    try {
      await this.accept(await this.api.submitScores(this.sessionId, scores));
    } catch (error) {
      this.fail(error);
    }
  }

  async saveActionItems(items: ActionItem[]): Promise<void> {
    try {
      await this.accept(await this.api.submitActionItems(this.sessionId, items));
    } catch (error) {
      this.fail(error);
    }
  }

  exportAvailable(): boolean {
    return this.view !== null && (this.view.state === "debrief" || this.view.state === "closed");
  }

  /** Fetch the debrief for download; the JSON half is byte-identical to the
   * service response. Only available in Debrief/Closed. */
  async exportDebrief(): Promise<DebriefExport> {
    if (!this.exportAvailable()) {
      throw new ApiError(409, "bad-state", "debrief export is only available in Debrief or Closed");
    }
    const raw = await this.api.getDebriefRaw(this.sessionId);
    const report = JSON.parse(raw) as DebriefReport;
    return { json: raw, text: debriefText(report) };
  }
}
