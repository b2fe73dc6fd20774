/**
 * Pure presentation math. The UI never infers anything itself: every number
 * on screen is derived from service responses by the functions here, which
 * makes the arithmetic unit-testable without a DOM.
 */
import type { PredictResponse } from "./types";

export function sigmoid(z: number): number {
  if (z >= 0) {
    return 1 / (1 + Math.exp(-z));
  }
  const e = Math.exp(z);
  return e / (1 + e);
}

/** Margin reconstructed from the displayed attribution parts. */
export function reconstructedMargin(response: PredictResponse): number {
  let total = response.base_value;
  for (const value of Object.values(response.shap_values)) {
    total += value;
  }
  return total;
}

/**
 * The gauge shows sigmoid(base + sum of displayed margin-space bars); it
 * must agree with the service's probability to rendering tolerance.
 */
export const LOCAL_ACCURACY_TOLERANCE = 1e-4;

export function gaugeProbability(response: PredictResponse): number {
  return sigmoid(reconstructedMargin(response));
}

export function localAccuracyGap(response: PredictResponse): number {
  return Math.abs(gaugeProbability(response) - response.probability);
}

export interface Bar {
  feature: string;
  /** exact margin-space attribution from the service */
  margin: number;
  /** probability-space delta (approximate, for the labelled toggle view) */
  probabilityDelta: number;
}

/** Bars sorted by |margin attribution|, largest first; ties keep name order. */
export function attributionBars(response: PredictResponse): Bar[] {
  const margin = reconstructedMargin(response);
  const bars = Object.entries(response.shap_values).map(([feature, value]) => ({
    feature,
    margin: value,
    // approximate: probability change from removing this bar's contribution
    probabilityDelta: sigmoid(margin) - sigmoid(margin - value),
  }));
  bars.sort((a, b) => {
    const diff = Math.abs(b.margin) - Math.abs(a.margin);
    return diff !== 0 ? diff : a.feature.localeCompare(b.feature);
  });
  return bars;
}

/** Are all bars flat (a model that used no feature for this row)? */
export function barsAreFlat(response: PredictResponse): boolean {
  return Object.values(response.shap_values).every((v) => v === 0);
}

export interface ComparisonRow {
  label: string;
  probability: number;
  deltaVsBase: number | null;
  predictedMissed: boolean;
}

/** Side-by-side scenario table; the first row is the base scenario. */
export function comparisonRows(
  labels: string[],
  responses: PredictResponse[],
): ComparisonRow[] {
  const base = responses[0];
  return responses.map((response, i) => ({
    label: labels[i] ?? `scenario ${i}`,
    probability: response.probability,
    deltaVsBase: i === 0 || base === undefined ? null : response.probability - base.probability,
    predictedMissed: response.predicted_missed,
  }));
}

export function formatProbability(p: number): string {
  return `${(100 * p).toFixed(1)}%`;
}

export function formatDelta(delta: number | null): string {
  if (delta === null) {
    return "—";
  }
  const points = 100 * delta;
  return `${points >= 0 ? "+" : ""}${points.toFixed(1)} pp`;
}
