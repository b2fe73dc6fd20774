/**
 * Acceptance round trip against a recorded live service exchange: the
 * what-if batch below was captured verbatim from POST /v1/whatif of a
 * trained bundle. Every gauge the UI would render must reproduce the
 * service probability from the displayed margin-space parts within 1e-4.
 */
import { describe, expect, it } from "vitest";

import fixture from "./fixtures/whatif-response.json";
import { applyResponses, initialState, perturbationPayloads, addScenario } from "../src/scenarios";
import {
  LOCAL_ACCURACY_TOLERANCE, attributionBars, gaugeProbability, localAccuracyGap,
} from "../src/logic";
import { breakEvenVerdict, formatRMin, rMinFromPrecision } from "../src/breakeven";
import type { WhatIfResponse } from "../src/types";

const recorded = fixture as WhatIfResponse;

describe("recorded what-if round trip", () => {
  it("form state produces one payload per scenario, base first", () => {
    let state = initialState({ "Perceived Conn. Time": 45 });
    state = addScenario(state, "tight", { "Perceived Conn. Time": 15 });
    state = addScenario(state, "roomy", { "Perceived Conn. Time": 150 });
    expect(perturbationPayloads(state)).toHaveLength(recorded.responses.length);
  });

  it("every rendered gauge equals sigmoid(base + sum of displayed bars) within 1e-4", () => {
    let state = initialState({ "Perceived Conn. Time": 45 });
    state = addScenario(state, "tight", { "Perceived Conn. Time": 15 });
    state = addScenario(state, "roomy", { "Perceived Conn. Time": 150 });
    state = applyResponses(state, recorded.responses);
    for (const result of state.results!) {
      expect(localAccuracyGap(result.response)).toBeLessThanOrEqual(LOCAL_ACCURACY_TOLERANCE);
      expect(gaugeProbability(result.response)).toBeCloseTo(result.response.probability, 5);
    }
  });

  it("a tighter margin raises the displayed risk, a roomier one lowers it", () => {
    const [base, tight, roomy] = recorded.responses;
    expect(tight!.probability).toBeGreaterThan(base!.probability);
    expect(roomy!.probability).toBeLessThan(base!.probability);
  });

  it("bars are sorted by absolute attribution for each scenario", () => {
    for (const response of recorded.responses) {
      const bars = attributionBars(response);
      for (let i = 1; i < bars.length; i++) {
        expect(Math.abs(bars[i - 1]!.margin)).toBeGreaterThanOrEqual(Math.abs(bars[i]!.margin));
      }
    }
  });

  it("break-even widget renders 1.16 for a model reporting precision 0.86", () => {
    const rMin = rMinFromPrecision(0.86);
    expect(formatRMin(rMin)).toBe("1.16");
    expect(breakEvenVerdict(1.5, rMin)).toBe("pays");
  });
});
