/**
 * Scenario bookkeeping: the base form plus a list of feature overrides.
 * The base scenario (no overrides) is always submitted first so every
 * comparison has its reference row; response order mirrors submission order.
 */
import type { FeatureMap, PredictResponse, Scenario, ScenarioResult } from "./types";

export interface ScenarioState {
  base: FeatureMap;
  scenarios: Scenario[];
  results: ScenarioResult[] | null;
  fieldError: { feature: string; message: string } | null;
  networkError: boolean;
}

export function initialState(base: FeatureMap): ScenarioState {
  return { base, scenarios: [], results: null, fieldError: null, networkError: false };
}

/** Perturbation payloads in submission order: base first, then each scenario. */
export function perturbationPayloads(state: ScenarioState): FeatureMap[] {
  return [{}, ...state.scenarios.map((s) => s.overrides)];
}

export function scenarioLabels(state: ScenarioState): string[] {
  return ["base", ...state.scenarios.map((s) => s.label)];
}

export function applyResponses(
  state: ScenarioState,
  responses: PredictResponse[],
): ScenarioState {
  const scenarios: Scenario[] = [{ label: "base", overrides: {} }, ...state.scenarios];
  if (responses.length !== scenarios.length) {
    throw new Error(
      `response count ${responses.length} does not match ${scenarios.length} scenarios`,
    );
  }
  const results = scenarios.map((scenario, i) => ({
    scenario,
    response: responses[i]!,
  }));
  return { ...state, results, fieldError: null, networkError: false };
}

const FIELD_ERROR = /feature '([^']+)'/;

/** Map a 4xx detail message onto the offending form field, when it names one. */
export function fieldErrorFromDetail(detail: string): { feature: string; message: string } | null {
  const match = FIELD_ERROR.exec(detail);
  return match ? { feature: match[1]!, message: detail } : null;
}

export function addScenario(state: ScenarioState, label: string, overrides: FeatureMap): ScenarioState {
  return { ...state, scenarios: [...state.scenarios, { label, overrides }] };
}

export function removeScenario(state: ScenarioState, index: number): ScenarioState {
  const scenarios = state.scenarios.filter((_, i) => i !== index);
  return { ...state, scenarios };
}
