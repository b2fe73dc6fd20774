/**
 * The entry form is generated from the feature schema the service reports;
 * no field list is hardcoded, so the page adapts to whichever stage the
 * loaded model serves.
 */
import type { FeatureMap, FeatureSchema, FeatureValue, ModelInfo } from "./types";

export interface FormField {
  schema: FeatureSchema;
  id: string;
}

export function formFields(info: ModelInfo): FormField[] {
  return info.features.map((schema, i) => ({ schema, id: `field-${i}` }));
}

export function parseFieldValue(schema: FeatureSchema, raw: string | boolean): FeatureValue {
  if (schema.kind === "boolean") {
    return typeof raw === "boolean" ? raw : raw === "true";
  }
  if (schema.kind === "numeric") {
    const value = Number(raw);
    if (!Number.isFinite(value)) {
      throw new Error(`feature '${schema.name}' expects a number`);
    }
    return value;
  }
  return String(raw);
}

/** A plausible starting value per field so the form is usable immediately. */
export function defaultValue(schema: FeatureSchema): FeatureValue {
  if (schema.kind === "boolean") {
    return false;
  }
  if (schema.kind === "categorical") {
    return schema.known_categories?.[0] ?? "";
  }
  switch (schema.name) {
    case "Age":
      return 40;
    case "Dep. Day":
      return 2;
    case "Dep. Month Day":
      return 15;
    case "Boarding Delta":
      return 25;
    case "N Bus":
      return 0;
    default:
      return schema.unit === "minutes" ? 60 : 0;
  }
}

export function defaultFeatureMap(info: ModelInfo): FeatureMap {
  const map: FeatureMap = {};
  for (const feature of info.features) {
    map[feature.name] = defaultValue(feature);
  }
  return map;
}
