import { ApiClient, ApiError } from "./api";
import { breakEvenVerdict, rMinFromPrecision } from "./breakeven";
import { defaultFeatureMap, formFields, parseFieldValue } from "./form";
import {
  applyResponses, addScenario, fieldErrorFromDetail, initialState,
  perturbationPayloads, removeScenario, ScenarioState,
} from "./scenarios";
import {
  clearBanners, highlightFieldError, renderBars, renderBreakEven,
  renderComparison, renderGauge, renderRetryBanner,
} from "./render";
import type { FeatureMap, ModelInfo } from "./types";

const devMode = new URLSearchParams(location.search).has("dev");
const api = new ApiClient("", fetch.bind(globalThis), devMode);

const root = document.getElementById("app")!;
let view: "margin" | "probability" = "probability";
let state: ScenarioState;
let model: ModelInfo;

function readForm(form: HTMLElement): FeatureMap {
  const map: FeatureMap = {};
  for (const field of formFields(model)) {
    const input = form.querySelector<HTMLInputElement>(`[data-feature="${CSS.escape(field.schema.name)}"]`)!;
    const raw = field.schema.kind === "boolean" ? input.checked : input.value;
    map[field.schema.name] = parseFieldValue(field.schema, raw);
  }
  return map;
}

function buildForm(form: HTMLElement): void {
  const defaults = defaultFeatureMap(model);
  for (const field of formFields(model)) {
    const wrap = document.createElement("label");
    wrap.className = "field";
    wrap.textContent = field.schema.name + (field.schema.unit ? ` (${field.schema.unit})` : "");
    let input: HTMLInputElement | HTMLSelectElement;
    if (field.schema.kind === "boolean") {
      input = document.createElement("input");
      input.type = "checkbox";
      input.checked = Boolean(defaults[field.schema.name]);
    } else if (field.schema.kind === "categorical" && field.schema.known_categories?.length) {
      input = document.createElement("select");
      for (const token of field.schema.known_categories) {
        const option = document.createElement("option");
        option.value = token;
        option.textContent = token;
        input.appendChild(option);
      }
    } else {
      input = document.createElement("input");
      input.type = field.schema.kind === "numeric" ? "number" : "text";
      input.value = String(defaults[field.schema.name]);
    }
    input.dataset.feature = field.schema.name;
    wrap.appendChild(input);
    form.appendChild(wrap);
  }
}

function scenarioFromControls(): { label: string; overrides: FeatureMap } {
  const slider = document.getElementById("perceived-slider") as HTMLInputElement;
  const network = document.getElementById("network-toggle") as HTMLSelectElement;
  const group = document.getElementById("group-toggle") as HTMLInputElement;
  const overrides: FeatureMap = {};
  const parts: string[] = [];
  const timeFeature = model.features.find((f) => f.unit === "minutes");
  if (timeFeature && slider.value !== "") {
    overrides[timeFeature.name] = Number(slider.value);
    parts.push(`${slider.value} min`);
  }
  if (network.value !== "(keep)") {
    overrides["Traffic Network"] = network.value;
    parts.push(network.value);
  }
  if (group.checked) {
    overrides["Is Group"] = true;
    parts.push("group");
  }
  return { label: parts.join(", ") || "unchanged", overrides };
}

async function submit(): Promise<void> {
  const form = document.getElementById("base-form")!;
  clearBanners(root);
  let base: FeatureMap;
  try {
    base = readForm(form);
  } catch (err) {
    const parsed = fieldErrorFromDetail(String((err as Error).message));
    if (parsed) {
      highlightFieldError(form, parsed.feature, parsed.message);
    }
    return;
  }
  state = { ...state, base };
  try {
    const reply = await api.whatif(model.stage, base, perturbationPayloads(state));
    if (reply === null) {
      return; // superseded by a newer submission
    }
    state = applyResponses(state, reply.responses);
    renderResults();
  } catch (err) {
    if (err instanceof ApiError && err.status < 500) {
      const parsed = fieldErrorFromDetail(err.detail);
      if (parsed) {
        state = { ...state, fieldError: parsed };
        highlightFieldError(form, parsed.feature, parsed.message);
        return;
      }
    }
    state = { ...state, networkError: true };
    renderRetryBanner(root, () => void submit());
  }
}

function renderResults(): void {
  const results = document.getElementById("results")!;
  results.replaceChildren();
  if (!state.results) {
    return;
  }
  const toggle = document.createElement("button");
  toggle.textContent = view === "margin"
    ? "switch to probability view (approximate)"
    : "switch to margin view (exact)";
  toggle.addEventListener("click", () => {
    view = view === "margin" ? "probability" : "margin";
    renderResults();
  });
  results.appendChild(toggle);

  for (const result of state.results) {
    const card = document.createElement("div");
    card.className = "card";
    renderGauge(card, result);
    renderBars(card, result, view);
    results.appendChild(card);
  }
  if (state.results.length > 1) {
    renderComparison(results, state.results);
  }
  if (devMode) {
    const log = document.createElement("pre");
    log.className = "devlog";
    log.textContent = JSON.stringify(api.requestLog, null, 2);
    results.appendChild(log);
  }
}

function updateBreakEven(): void {
  const input = document.getElementById("cost-ratio") as HTMLInputElement;
  const rMin = rMinFromPrecision(model.test_precision);
  const verdict = breakEvenVerdict(Number(input.value), rMin);
  renderBreakEven(document.getElementById("break-even")!, rMin, verdict);
}

async function boot(): Promise<void> {
  model = await api.getModel();
  state = initialState(defaultFeatureMap(model));
  document.getElementById("stage-title")!.textContent =
    `${model.stage} model ${model.version} — what-if console`;
  buildForm(document.getElementById("base-form")!);

  document.getElementById("add-scenario")!.addEventListener("click", () => {
    const { label, overrides } = scenarioFromControls();
    state = addScenario(state, label, overrides);
    renderScenarioList();
  });
  document.getElementById("run")!.addEventListener("click", () => void submit());
  document.getElementById("cost-ratio")!.addEventListener("input", updateBreakEven);
  updateBreakEven();
  renderScenarioList();
}

function renderScenarioList(): void {
  const list = document.getElementById("scenario-list")!;
  list.replaceChildren();
  state.scenarios.forEach((scenario, i) => {
    const item = document.createElement("li");
    item.textContent = scenario.label + " ";
    const remove = document.createElement("button");
    remove.textContent = "x";
    remove.addEventListener("click", () => {
      state = removeScenario(state, i);
      renderScenarioList();
    });
    item.appendChild(remove);
    list.appendChild(item);
  });
}

void boot();
