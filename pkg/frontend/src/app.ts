/**
 * Browser wiring: renders the scenario form, issues predictions (latest wins,
 * in-flight requests aborted), and swaps the chart SVG in place.  All logic
 * lives in the pure modules (form, validation, chart); this file only touches
 * the DOM.  No entered profile is stored anywhere.
 */

import { ApiClient, ApiUnavailableError, ApiValidationError } from "./api.js";
import { buildChartState, renderErrorView, renderSvg } from "./chart.js";
import {
  addScenario,
  initialState,
  removeScenario,
  setUnits,
  toPredictRequest,
  unitOptions,
  updateScenario,
  validateState,
  type FormState,
} from "./form.js";
import type { FieldError, Units } from "./types.js";
import { durationEnabled, type ScenarioForm } from "./validation.js";

const client = new ApiClient((window as { BARITRAJ_API_URL?: string }).BARITRAJ_API_URL ?? "");

let state: FormState = initialState();
let inFlight: AbortController | null = null;

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) {
    throw new Error(`missing element #${id}`);
  }
  return node as T;
}

function scenarioLabel(s: ScenarioForm, i: number): string {
  return `${s.operation} (scenario ${i + 1})`;
}

function fieldInput(
  scenario: number,
  name: string,
  label: string,
  input: string,
): string {
  return (
    `<label class="field" data-field="${name}" data-scenario="${scenario}">` +
    `<span>${label}</span>${input}<span class="error" id="err-${scenario}-${name}"></span></label>`
  );
}

function renderForm(): void {
  const container = el<HTMLDivElement>("scenarios");
  container.innerHTML = state.scenarios
    .map((s, i) => {
      const duration = durationEnabled(s) ? "" : "disabled";
      return (
        `<fieldset class="scenario" data-index="${i}"><legend>Scenario ${i + 1}</legend>` +
        fieldInput(i, "age_years", "Age (years)",
          `<input type="number" name="ageYears" min="18" max="74" value="${s.ageYears}">`) +
        fieldInput(i, "weight_kg", "Weight (kg)",
          `<input type="number" name="weightKg" min="65" max="295" value="${s.weightKg}">`) +
        fieldInput(i, "height_m", "Height (m)",
          `<input type="number" name="heightM" step="0.01" min="1.0" max="2.5" value="${s.heightM}">`) +
        fieldInput(i, "smoker", "Smoker",
          `<select name="smoker">` +
            ["no", "yes", "unknown"].map((v) => `<option value="${v}" ${s.smoker === v ? "selected" : ""}>${v}</option>`).join("") +
          `</select>`) +
        fieldInput(i, "diabetes_status", "Type 2 diabetes",
          `<select name="diabetesStatus">` +
            [["none", "none"], ["pre_t2d", "pre-diabetes"], ["t2d", "type 2 diabetes"]]
              .map(([v, label]) => `<option value="${v}" ${s.diabetesStatus === v ? "selected" : ""}>${label}</option>`)
              .join("") +
          `</select>`) +
        fieldInput(i, "diabetes_duration_years", "Diabetes duration (years)",
          `<input type="number" name="diabetesDurationYears" min="0" value="${s.diabetesDurationYears}" ${duration}>`) +
        fieldInput(i, "operation", "Operation",
          `<select name="operation">` +
            ["RYGB", "SG", "AGB"].map((v) => `<option value="${v}" ${s.operation === v ? "selected" : ""}>${v}</option>`).join("") +
          `</select>`) +
        (state.scenarios.length > 1 ? `<button type="button" class="remove" data-index="${i}">remove</button>` : "") +
        `</fieldset>`
      );
    })
    .join("");

  const unitsBox = el<HTMLDivElement>("units");
  unitsBox.innerHTML = unitOptions(state)
    .map(
      (o) =>
        `<label title="${o.tooltip ?? ""}"><input type="radio" name="units" value="${o.units}" ` +
        `${state.units === o.units ? "checked" : ""} ${o.enabled ? "" : "disabled"}>${o.label}</label>`,
    )
    .join(" ");
  el<HTMLButtonElement>("add-scenario").disabled = state.scenarios.length >= 2;
}

function showFieldErrors(errors: FieldError[]): void {
  document.querySelectorAll(".error").forEach((node) => (node.textContent = ""));
  for (const e of errors) {
    const node = document.getElementById(`err-${e.scenario ?? 0}-${e.field}`);
    if (node) {
      node.textContent = e.message;
    }
  }
}

function showBanner(message: string | null): void {
  const banner = el<HTMLDivElement>("banner");
  banner.textContent = message ?? "";
  banner.style.display = message ? "block" : "none";
}

async function submit(): Promise<void> {
  const clientErrors = validateState(state);
  showFieldErrors(clientErrors);
  if (clientErrors.length > 0) {
    return;
  }
  inFlight?.abort();
  const controller = new AbortController();
  inFlight = controller;
  try {
    const response = await client.predict(toPredictRequest(state), controller.signal);
    if (controller !== inFlight) {
      return; // a newer request superseded this one
    }
    showBanner(null);
    const labels = state.scenarios.map(scenarioLabel);
    el<HTMLDivElement>("chart").innerHTML = renderSvg(buildChartState(response, labels));
  } catch (err) {
    if (err instanceof DOMException && err.name === "AbortError") {
      return;
    }
    if (err instanceof ApiValidationError) {
      showFieldErrors(err.fieldErrors);
      return;
    }
    const message = err instanceof ApiUnavailableError ? err.message : "unexpected error";
    showBanner(`${message} — your inputs are kept; press Update to retry`);
    el<HTMLDivElement>("chart").innerHTML = renderErrorView(message);
  }
}

function bind(): void {
  renderForm();
  el<HTMLDivElement>("scenarios").addEventListener("change", (event) => {
    const target = event.target as HTMLInputElement | HTMLSelectElement;
    const fieldset = target.closest<HTMLFieldSetElement>(".scenario");
    if (!fieldset || !target.name) {
      return;
    }
    const index = Number(fieldset.dataset.index);
    const numeric = ["ageYears", "weightKg", "heightM", "diabetesDurationYears"];
    const value = numeric.includes(target.name) ? Number(target.value) : target.value;
    state = updateScenario(state, index, { [target.name]: value } as never);
    renderForm();
    void submit();
  });
  el<HTMLDivElement>("scenarios").addEventListener("click", (event) => {
    const button = (event.target as HTMLElement).closest<HTMLButtonElement>(".remove");
    if (button) {
      state = removeScenario(state, Number(button.dataset.index));
      renderForm();
      void submit();
    }
  });
  el<HTMLDivElement>("units").addEventListener("change", (event) => {
    const target = event.target as HTMLInputElement;
    if (target.name === "units") {
      state = setUnits(state, target.value as Units);
      void submit(); // unit switch re-renders without re-entering the form
    }
  });
  el<HTMLButtonElement>("add-scenario").addEventListener("click", () => {
    state = addScenario(state);
    renderForm();
    void submit();
  });
  el<HTMLButtonElement>("update").addEventListener("click", () => void submit());
  void submit();
}

document.addEventListener("DOMContentLoaded", bind);
