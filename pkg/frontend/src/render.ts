/** DOM rendering. All numbers come from the pure helpers in logic.ts. */
import {
  Bar, attributionBars, comparisonRows, formatDelta, formatProbability,
  gaugeProbability, localAccuracyGap, LOCAL_ACCURACY_TOLERANCE,
} from "./logic";
import { BreakEvenVerdict, VERDICT_TEXT, formatRMin } from "./breakeven";
import type { ScenarioResult } from "./types";

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  className?: string,
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  if (className) {
    node.className = className;
  }
  if (text !== undefined) {
    node.textContent = text;
  }
  return node;
}

export function renderGauge(container: HTMLElement, result: ScenarioResult): void {
  const { response } = result;
  if (localAccuracyGap(response) > LOCAL_ACCURACY_TOLERANCE) {
    container.appendChild(el("div", "error", "explanation inconsistent with probability"));
    return;
  }
  const probability = gaugeProbability(response);
  const gauge = el("div", "gauge");
  const fill = el("div", "gauge-fill");
  fill.style.width = `${(100 * probability).toFixed(2)}%`;
  fill.classList.add(response.predicted_missed ? "risk-high" : "risk-low");
  gauge.appendChild(fill);
  const label = el(
    "div",
    "gauge-label",
    `${result.scenario.label}: ${formatProbability(probability)} miss risk` +
      (response.predicted_missed ? " (above threshold)" : ""),
  );
  container.append(label, gauge);
}

export function renderBars(
  container: HTMLElement,
  result: ScenarioResult,
  view: "margin" | "probability",
): void {
  const bars = attributionBars(result.response);
  const maxAbs = Math.max(1e-12, ...bars.map((b) => Math.abs(b.margin)));
  const list = el("div", "bars");
  const title = view === "margin"
    ? "attributions (log-odds, exact)"
    : "attributions (probability points, approximate)";
  list.appendChild(el("div", "bars-title", title));
  computeRows(bars, view, maxAbs).forEach((row) => list.appendChild(row));
  container.appendChild(list);
}

function computeRows(bars: Bar[], view: "margin" | "probability", maxAbs: number): HTMLElement[] {
  return bars.map((bar) => {
    const row = el("div", "bar-row");
    row.appendChild(el("span", "bar-name", bar.feature));
    const track = el("div", "bar-track");
    const fill = el("div", `bar-fill ${bar.margin >= 0 ? "pos" : "neg"}`);
    fill.style.width = `${(50 * Math.abs(bar.margin)) / maxAbs}%`;
    fill.style.marginLeft = bar.margin >= 0 ? "50%" : `${50 - (50 * Math.abs(bar.margin)) / maxAbs}%`;
    track.appendChild(fill);
    row.appendChild(track);
    const value = view === "margin"
      ? bar.margin.toFixed(3)
      : `${(100 * bar.probabilityDelta).toFixed(2)} pp`;
    row.appendChild(el("span", "bar-value", value));
    return row;
  });
}

export function renderComparison(container: HTMLElement, results: ScenarioResult[]): void {
  const rows = comparisonRows(
    results.map((r) => r.scenario.label),
    results.map((r) => r.response),
  );
  const table = el("table", "compare");
  const head = el("tr");
  ["scenario", "p(miss)", "delta vs base", "call"].forEach((h) => head.appendChild(el("th", "", h)));
  table.appendChild(head);
  for (const row of rows) {
    const tr = el("tr");
    tr.appendChild(el("td", "", row.label));
    tr.appendChild(el("td", "", formatProbability(row.probability)));
    tr.appendChild(el("td", "", formatDelta(row.deltaVsBase)));
    tr.appendChild(el("td", row.predictedMissed ? "risk-high" : "risk-low",
      row.predictedMissed ? "MISS" : "ok"));
    table.appendChild(tr);
  }
  container.appendChild(table);
}

export function renderBreakEven(
  container: HTMLElement,
  rMin: number | null,
  verdict: BreakEvenVerdict,
): void {
  container.replaceChildren();
  container.appendChild(el("span", "rmin", `r_min = ${formatRMin(rMin)}`));
  container.appendChild(el("span", `badge badge-${verdict}`, VERDICT_TEXT[verdict]));
}

export function renderRetryBanner(container: HTMLElement, onRetry: () => void): void {
  const banner = el("div", "banner", "network problem, your scenarios are preserved ");
  const button = el("button", "", "retry");
  button.addEventListener("click", onRetry);
  banner.appendChild(button);
  container.prepend(banner);
}

export function clearBanners(container: HTMLElement): void {
  container.querySelectorAll(".banner").forEach((b) => b.remove());
}

export function highlightFieldError(
  form: HTMLElement,
  feature: string,
  message: string,
): void {
  form.querySelectorAll(".field-error").forEach((n) => n.classList.remove("field-error"));
  form.querySelectorAll(".field-error-text").forEach((n) => n.remove());
  const input = form.querySelector<HTMLElement>(`[data-feature="${CSS.escape(feature)}"]`);
  if (input) {
    input.classList.add("field-error");
    input.insertAdjacentElement("afterend", el("span", "field-error-text", message));
  }
}
