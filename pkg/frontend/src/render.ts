/**
 * Pure HTML renderers: server payloads in, markup out.
 *
 * Values shown on screen (scores, coverage, dispositions) are copied
 * verbatim from the service payloads; nothing is recomputed here.
 */

import type {
  DebriefReport,
  EventQuestion,
  SessionView,
} from "./types";

export function esc(value: unknown): string {
  return String(value)
    .replaceAll("&", "&amp;")
    .replaceAll("<", "&lt;")
    .replaceAll(">", "&gt;")
    .replaceAll('"', "&quot;");
}

export function advanceLabel(view: SessionView): string {
  switch (view.state) {
    case "created":
      return "Begin briefing";
    case "briefing":
      return "Start first event";
    case "in-event":
      return view.thread_index !== null && view.thread_index + 1 < view.thread_count
        ? "Next event"
        : "Go to debrief";
    case "debrief":
      return "Close session";
    default:
      return "Session closed";
  }
}

function stateBadge(view: SessionView): string {
  const label =
    view.state === "in-event" && view.thread_index !== null
      ? `event ${view.thread_index + 1} of ${view.thread_count}`
      : view.state;
  return `<span class="badge state-${esc(view.state)}">${esc(label)}</span>`;
}

export function renderHeader(view: SessionView): string {
  return `
  <header>
    <h1>${esc(view.scenario_title)}</h1>
    <div class="meta">
      ${stateBadge(view)}
      <span class="session-id">session ${esc(view.id)}</span>
      <span class="clock">clock ${esc(view.clock)}</span>
      <span class="roster">roster: ${view.roster.map(esc).join(", ")}</span>
    </div>
    <div class="controls">
      <button data-action="advance" ${view.state === "closed" ? "disabled" : ""}>
        ${esc(advanceLabel(view))}</button>
      <button data-action="refresh">Refresh</button>
    </div>
  </header>`;
}

export function renderBanner(banner: string | null): string {
  if (!banner) {
    return "";
  }
  return `<div class="banner" role="alert">${esc(banner)}</div>`;
}

function renderQuestion(view: SessionView, question: EventQuestion): string {
  const responses = view.responses.filter((r) => r.question_id === question.id);
  const answered = responses
    .map(
      (r) =>
        `<li class="response"><strong>${esc(r.respondent)}</strong>: ${esc(r.text)}</li>`,
    )
    .join("");
  const entryRows = view.roster
    .map(
      (member, index) => `
      <div class="response-entry">
        <label>${esc(member)}</label>
        <input type="text" data-draft="response" data-question="${esc(question.id)}"
               data-respondent-index="${index}" placeholder="discussion response" />
        <button data-action="respond" data-question="${esc(question.id)}"
                data-respondent-index="${index}">Record</button>
      </div>`,
    )
    .join("");
  const origin = question.source === "primary" ? "" :
    ` <span class="origin">(from ${esc(question.source)})</span>`;
  return `
  <div class="question" data-question-block="${esc(question.id)}">
    <p class="prompt"><strong>Question</strong> <code>${esc(question.id)}</code>:
      ${esc(question.prompt)}${origin}</p>
    <ul class="responses">${answered}</ul>
    ${entryRows}
  </div>`;
}

export function renderEvent(view: SessionView): string {
  if (view.state !== "in-event" || !view.event) {
    if (view.state === "created" || view.state === "briefing") {
      return `<section class="event"><p class="hint">
        ${view.state === "created"
          ? "Session created. Advance to brief the participants."
          : "Briefing in progress: read the preamble aloud, then start the first event."}
      </p></section>`;
    }
    return "";
  }
  const event = view.event;
  const injects = event.available_injects
    .map(
      (inject) => `
    <div class="inject">
      <p><strong>Optional inject</strong> <code>${esc(inject.id)}</code>:
        ${esc(inject.narrative)}</p>
      <p class="condition">When to fire: ${esc(inject.condition_note || "facilitator's discretion")}</p>
      <button data-action="fire" data-inject="${esc(inject.id)}">Fire inject</button>
    </div>`,
    )
    .join("");
  const fired = view.fired_injects.length
    ? `<p class="fired">Fired: ${view.fired_injects.map(esc).join(", ")}</p>`
    : "";
  return `
  <section class="event">
    <h2>Event ${esc(event.synopsis)}</h2>
    <p class="narrative">${esc(event.narrative)}</p>
    ${event.questions.map((q) => renderQuestion(view, q)).join("")}
    <h3>Optional injects</h3>
    ${injects || "<p class='hint'>No unfired injects for this event.</p>"}
    ${fired}
  </section>`;
}

export function renderCoverage(view: SessionView): string {
  const current = view.state === "in-event" && view.event ? view.event.synopsis : null;
  const rows = view.objective_trace
    .map((entry) => {
      const live = current !== null && entry.threads.includes(current);
      return `<tr class="${live ? "live" : ""}">
        <td><code>${esc(entry.objective)}</code></td>
        <td>${esc(entry.label)}</td>
        <td>${entry.triggers.map(esc).join(" ")}</td>
        <td>${entry.threads.map(esc).join(", ")}${live ? " (now)" : ""}</td>
      </tr>`;
    })
    .join("");
  return `
  <aside class="coverage">
    <h2>Objective coverage</h2>
    <table>
      <thead><tr><th>Objective</th><th></th><th>Triggers</th><th>Events</th></tr></thead>
      <tbody>${rows}</tbody>
    </table>
  </aside>`;
}

function renderScoringGrid(view: SessionView): string {
  const current = new Map(view.scores.map((s) => [s.measure_id, s]));
  const rows = view.measures
    .map((measure) => {
      const existing = current.get(measure.id);
      const radio = (rating: string) => `
        <label><input type="radio" name="score-${esc(measure.id)}" value="${rating}"
          ${existing?.rating === rating ? "checked" : ""} /> ${rating}</label>`;
      return `<tr>
        <td><code>${esc(measure.id)}</code> on <code>${esc(measure.attached_to)}</code><br/>
            <span class="target">${esc(measure.target_response)}</span><br/>
            <span class="refs">objectives: ${measure.objective_refs.map(esc).join(", ")}</span></td>
        <td class="ratings">${radio("yes")}${radio("partial")}${radio("no")}</td>
        <td><input type="text" data-draft="note" data-measure="${esc(measure.id)}"
             placeholder="note" value="${esc(existing?.note ?? "")}" /></td>
      </tr>`;
    })
    .join("");
  return `
  <h3>Scoring grid</h3>
  <table class="scores">
    <thead><tr><th>Measure and target response</th><th>Rating</th><th>Note</th></tr></thead>
    <tbody>${rows}</tbody>
  </table>
  <button data-action="save-scores" ${view.state !== "debrief" ? "disabled" : ""}>
    Save scores</button>`;
}

function renderActionItems(view: SessionView): string {
  const items = view.action_items
    .map(
      (item) => `<li>[${esc(item.owner)}] ${esc(item.text)}
        ${item.objective_refs.length ? `(${item.objective_refs.map(esc).join(", ")})` : ""}</li>`,
    )
    .join("");
  return `
  <h3>Action items</h3>
  <ul class="action-items">${items || "<li class='hint'>none recorded</li>"}</ul>
  <div class="item-editor">
    <input type="text" data-draft="item-text" placeholder="action item" />
    <input type="text" data-draft="item-owner" placeholder="owner" />
    <input type="text" data-draft="item-refs" placeholder="objectives (comma separated)" />
    <button data-action="save-item" ${view.state !== "debrief" ? "disabled" : ""}>
      Record action item</button>
  </div>`;
}

export function renderDebriefReport(report: DebriefReport): string {
  const rows = report.objectives
    .map(
      (objective) => `<tr>
      <td><code>${esc(objective.objective)}</code></td>
      <td>${esc(objective.label)}</td>
      <td>${objective.mean_score === "unscored" ? "unscored" : esc(objective.mean_score)}</td>
      <td>${objective.unanswered_questions.map(esc).join(", ") || "-"}</td>
      <td>${objective.unfired_injects.map(esc).join(", ") || "-"}</td>
    </tr>`,
    )
    .join("");
  return `
  <h3>Report</h3>
  <p>Questions answered ${esc(report.questions_answered)}/${esc(report.questions_total)};
     injects fired ${esc(report.injects_fired)}/${esc(report.injects_total)}.</p>
  <table class="report">
    <thead><tr><th>Objective</th><th></th><th>Mean score</th>
      <th>Unanswered</th><th>Unfired injects</th></tr></thead>
    <tbody>${rows}</tbody>
  </table>`;
}

export function renderDebrief(view: SessionView, report: DebriefReport | null): string {
  if (view.state !== "debrief" && view.state !== "closed") {
    return "";
  }
  return `
  <section class="debrief">
    <h2>Debrief</h2>
    ${renderScoringGrid(view)}
    ${renderActionItems(view)}
    ${report ? renderDebriefReport(report) : ""}
    <div class="export">
      <button data-action="export-json">Export debrief (JSON)</button>
      <button data-action="export-text">Export debrief (text)</button>
    </div>
  </section>`;
}

export function renderSession(
  view: SessionView,
  banner: string | null,
  report: DebriefReport | null,
): string {
  return `
  ${renderHeader(view)}
  ${renderBanner(banner)}
  <main>
    ${renderEvent(view)}
    ${renderCoverage(view)}
  </main>
  ${renderDebrief(view, report)}`;
}

/** Human-readable export rendering, derived only from the report payload. */
export function debriefText(report: DebriefReport): string {
  const lines = [
    `Debrief for session ${report.session_id}`,
    `Scenario: ${report.scenario_title} (state ${report.state})`,
    `Questions answered: ${report.questions_answered}/${report.questions_total}; ` +
      `injects fired: ${report.injects_fired}/${report.injects_total}`,
    `Objectives:`,
  ];
  for (const objective of report.objectives) {
    const mean =
      objective.mean_score === "unscored" ? "unscored" : String(objective.mean_score);
    lines.push(`  ${objective.objective}: ${objective.label}`);
    lines.push(`      mean score ${mean}; events ${objective.threads.join(", ")}`);
    if (objective.unanswered_questions.length) {
      lines.push(`      unanswered: ${objective.unanswered_questions.join(", ")}`);
    }
    if (objective.unfired_injects.length) {
      lines.push(`      unfired injects: ${objective.unfired_injects.join(", ")}`);
    }
  }
  if (report.action_items.length) {
    lines.push("Action items:");
    for (const item of report.action_items) {
      const refs = item.objective_refs.length ? ` (${item.objective_refs.join(", ")})` : "";
      lines.push(`  - [${item.owner}] ${item.text}${refs}`);
    }
  }
  return lines.join("\n") + "\n";
}
