/**
 * DOM glue: renders the controller's HTML into a container and translates
 * user events (clicks, input values) into controller commands.
 */

import type { SessionConsole } from "./controller";
import type { ActionItem, MeasureScore } from "./types";

export type Downloader = (filename: string, content: string, mime: string) => void;

function draftValue(root: HTMLElement, selector: string): string {
  const input = root.querySelector<HTMLInputElement>(selector);
  return input ? input.value.trim() : "";
}

export function collectScores(root: HTMLElement, console_: SessionConsole): MeasureScore[] {
  const view = console_.view;
  if (!view) {
    return [];
  }
  const scores: MeasureScore[] = [];
  for (const measure of view.measures) {
    const checked = root.querySelector<HTMLInputElement>(
      `input[name="score-${measure.id}"]:checked`,
    );
    if (!checked) {
      continue;
    }
    const note = draftValue(root, `input[data-draft="note"][data-measure="${measure.id}"]`);
    scores.push({
      measure_id: measure.id,
      rating: checked.value as MeasureScore["rating"],
      note,
    });
  }
  return scores;
}

export function collectActionItem(root: HTMLElement): ActionItem | null {
  const text = draftValue(root, 'input[data-draft="item-text"]');
  const owner = draftValue(root, 'input[data-draft="item-owner"]');
  const refs = draftValue(root, 'input[data-draft="item-refs"]');
  if (!text || !owner) {
    return null;
  }
  return {
    text,
    owner,
    objective_refs: refs ? refs.split(",").map((r) => r.trim()).filter(Boolean) : [],
  };
}

export function bindConsole(
  root: HTMLElement,
  console_: SessionConsole,
  download: Downloader,
): void {
  root.addEventListener("click", (event) => {
    const target = event.target as HTMLElement | null;
    const button = target?.closest<HTMLElement>("button[data-action]");
    if (!button) {
      return;
    }
    const action = button.dataset.action;
    void handleAction(root, console_, download, action ?? "", button);
  });
}

async function handleAction(
  root: HTMLElement,
  console_: SessionConsole,
  download: Downloader,
  action: string,
  button: HTMLElement,
): Promise<void> {
  switch (action) {
    case "advance":
      return console_.advance();
    case "refresh":
      return console_.load();
    case "fire": {
      const injectId = button.dataset.inject;
      if (injectId) {
        return console_.fireInject(injectId);
      }
      return;
    }
    case "respond": {
      const questionId = button.dataset.question ?? "";
      const index = Number(button.dataset.respondentIndex ?? "-1");
      const respondent = console_.view?.roster[index];
      const text = draftValue(
        root,
        `input[data-draft="response"][data-question="${questionId}"]` +
          `[data-respondent-index="${index}"]`,
      );
      if (questionId && respondent && text) {
        return console_.submitResponse(questionId, respondent, text);
      }
      return;
    }
    case "save-scores":
      return console_.saveScores(collectScores(root, console_));
    case "save-item": {
      const item = collectActionItem(root);
      if (item && console_.view) {
        return console_.saveActionItems([...console_.view.action_items, item]);
      }
      return;
    }
    case "export-json": {
      const exported = await console_.exportDebrief();
      download(`debrief-${console_.sessionId}.json`, exported.json, "application/json");
      return;
    }
    case "export-text": {
      const exported = await console_.exportDebrief();
      download(`debrief-${console_.sessionId}.txt`, exported.text, "text/plain");
      return;
    }
    default:
      return;
  }
}
