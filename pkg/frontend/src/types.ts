export type FeatureKind = "numeric" | "categorical" | "boolean";

export interface FeatureSchema {
  name: string;
  kind: FeatureKind;
  known_categories?: string[];
  unit?: string;
}

export interface ModelInfo {
  stage: string;
  version: string;
  features: FeatureSchema[];
  threshold: number;
  threshold_objective: string;
  test_precision: number;
  r_min: number | null;
  n_trees: number;
  base_score: number;
}

export type FeatureValue = string | number | boolean;
export type FeatureMap = Record<string, FeatureValue>;

export interface PredictResponse {
  stage: string;
  model_version: string;
  probability: number;
  threshold: number;
  predicted_missed: boolean;
  margin: number;
  base_value: number;
  shap_values: Record<string, number>;
}

export interface WhatIfResponse {
  responses: PredictResponse[];
}

/** One what-if scenario: a label plus feature overrides on the base form. */
export interface Scenario {
  label: string;
  overrides: FeatureMap;
}

export interface ScenarioResult {
  scenario: Scenario;
  response: PredictResponse;
}
