/**
 * Break-even economics: preventing a predicted miss pays off when the
 * reaction/prevention cost ratio r exceeds 1/precision of the loaded model.
 */

export type BreakEvenVerdict = "pays" | "neutral" | "does-not-pay" | "unavailable";

const NEUTRAL_EPS = 1e-9;

export function rMinFromPrecision(precision: number): number | null {
  if (!(precision > 0)) {
    return null;
  }
  return 1 / precision;
}

export function breakEvenVerdict(r: number, rMin: number | null): BreakEvenVerdict {
  if (rMin === null || !Number.isFinite(r) || r <= 0) {
    return "unavailable";
  }
  if (Math.abs(r - rMin) <= NEUTRAL_EPS * Math.max(1, rMin)) {
    return "neutral";
  }
  return r > rMin ? "pays" : "does-not-pay";
}

export function formatRMin(rMin: number | null): string {
  return rMin === null ? "n/a" : rMin.toFixed(2);
}

export const VERDICT_TEXT: Record<BreakEvenVerdict, string> = {
  pays: "prevention pays",
  neutral: "break-even",
  "does-not-pay": "prevention does not pay",
  unavailable: "no precision available",
};
