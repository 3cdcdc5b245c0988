import { describe, expect, it } from "vitest";

import { advanceLabel, debriefText, esc, renderSession } from "../src/render";
import type { DebriefReport, SessionView } from "../src/types";

function baseView(overrides: Partial<SessionView> = {}): SessionView {
  return {
    id: "ses-test",
    scenario_id: "scn-test",
    scenario_title: "Test Exercise",
    scenario_digest: "0".repeat(64),
    state: "created",
    thread_index: null,
    thread_count: 2,
    roster: ["facilitator", "team-blue"],
    clock: 0,
    fired_injects: [],
    responses: [],
    scores: [],
    action_items: [],
    objective_trace: [
      { objective: "I1", label: "First", triggers: ["A"], threads: [1] },
      { objective: "I2", label: "Second", triggers: ["B", "C"], threads: [1, 2] },
    ],
    event: null,
    measures: [
      {
        id: "mea-01",
        attached_to: "q1-1",
        target_response: "Escalates promptly.",
        objective_refs: ["I1"],
      },
    ],
    ...overrides,
  };
}

const inEvent = (): SessionView =>
  baseView({
    state: "in-event",
    thread_index: 0,
    clock: 2,
    event: {
      synopsis: 1,
      narrative: "Something <odd> happens.",
      questions: [{ id: "q1-1", prompt: "How would you respond?", source: "primary" }],
      available_injects: [
        {
          id: "inj-1-1",
          narrative: "More happens.",
          condition_note: "after first answer",
          question: { id: "q1-2", prompt: "And now?" },
        },
      ],
    },
  });

describe("advanceLabel", () => {
  it("walks the state machine labels", () => {
    expect(advanceLabel(baseView())).toBe("Begin briefing");
    expect(advanceLabel(baseView({ state: "briefing" }))).toBe("Start first event");
    expect(advanceLabel(inEvent())).toBe("Next event");
    expect(
      advanceLabel(baseView({ state: "in-event", thread_index: 1, event: inEvent().event })),
    ).toBe("Go to debrief");
    expect(advanceLabel(baseView({ state: "debrief" }))).toBe("Close session");
  });
});

describe("renderSession", () => {
  it("escapes narrative text", () => {
    const html = renderSession(inEvent(), null, null);
    expect(html).toContain("Something &lt;odd&gt; happens.");
    expect(html).not.toContain("<odd>");
  });

  it("shows questions with one entry row per roster member", () => {
    const html = renderSession(inEvent(), null, null);
    expect(html).toContain("q1-1");
    expect((html.match(/data-action="respond"/g) ?? []).length).toBe(2);
  });

  it("lists unfired injects with their condition notes", () => {
    const html = renderSession(inEvent(), null, null);
    expect(html).toContain("inj-1-1");
    expect(html).toContain("When to fire: after first answer");
  });

  it("marks objectives exercised by the current event", () => {
    const html = renderSession(inEvent(), null, null);
    expect(html).toContain('class="live"');
  });

  it("renders a banner when a command failed", () => {
    const html = renderSession(baseView(), "wrong-thread: nope", null);
    expect(html).toContain('role="alert"');
    expect(html).toContain("wrong-thread: nope");
  });

  it("shows the scoring grid only in debrief/closed", () => {
    expect(renderSession(baseView(), null, null)).not.toContain("Scoring grid");
    const html = renderSession(baseView({ state: "debrief" }), null, null);
    expect(html).toContain("Scoring grid");
    expect(html).toContain('name="score-mea-01"');
    expect(html).toContain("Export debrief (JSON)");
  });

  it("prefills previously saved ratings", () => {
    const view = baseView({
      state: "debrief",
      scores: [{ measure_id: "mea-01", rating: "partial", note: "so-so" }],
    });
    const html = renderSession(view, null, null);
    expect(html).toMatch(/value="partial"\s+checked/);
  });
});

describe("debriefText", () => {
  it("renders the report without recomputing anything", () => {
    const report: DebriefReport = {
      session_id: "ses-test",
      scenario_title: "Test Exercise",
      state: "closed",
      objectives: [
        {
          objective: "I1",
          label: "First",
          threads: [1],
          measures: ["mea-01"],
          mean_score: 0.5,
          unanswered_questions: ["q1-2"],
          unfired_injects: [],
        },
        {
          objective: "I2",
          label: "Second",
          threads: [1, 2],
          measures: [],
          mean_score: "unscored",
          unanswered_questions: [],
          unfired_injects: ["inj-1-1"],
        },
      ],
      action_items: [{ text: "write policy", owner: "CISO", objective_refs: ["I1"] }],
      questions_total: 2,
      questions_answered: 1,
      injects_total: 1,
      injects_fired: 0,
    };
    const text = debriefText(report);
    expect(text).toContain("Questions answered: 1/2");
    expect(text).toContain("mean score 0.5");
    expect(text).toContain("mean score unscored");
    expect(text).toContain("- [CISO] write policy (I1)");
  });
});

describe("esc", () => {
  it("escapes html metacharacters", () => {
    expect(esc('<a href="x">&')).toBe("&lt;a href=&quot;x&quot;&gt;&amp;");
  });
});
