/**
 * Calculator form state: one or two what-if scenarios plus a display unit.
 * All transitions are pure functions returning new state, so the state
 * machine is testable without a DOM.  The form round-trips losslessly with
 * the prediction request it produces.
 */

import type { PredictRequest, ScenarioProfile, Units } from "./types.js";
import {
  durationEnabled,
  ewlAvailable,
  validateScenario,
  type ScenarioForm,
  type SmokerChoice,
} from "./validation.js";

export const MAX_SCENARIOS = 2;
export const DEFAULT_UNITS: Units = "kg";

export interface FormState {
  scenarios: ScenarioForm[];
  units: Units;
}

export function defaultScenario(): ScenarioForm {
  return {
    ageYears: 40,
    weightKg: 120,
    heightM: 1.7,
    smoker: "no",
    diabetesStatus: "none",
    diabetesDurationYears: 0,
    operation: "RYGB",
  };
}

export function initialState(): FormState {
  return { scenarios: [defaultScenario()], units: DEFAULT_UNITS };
}

export function addScenario(state: FormState): FormState {
  if (state.scenarios.length >= MAX_SCENARIOS) {
    return state;
  }
  const copy = { ...state.scenarios[state.scenarios.length - 1] };
  return { ...state, scenarios: [...state.scenarios, copy] };
}

export function removeScenario(state: FormState, index: number): FormState {
  if (state.scenarios.length <= 1) {
    return state;
  }
  return { ...state, scenarios: state.scenarios.filter((_, i) => i !== index) };
}

export function setUnits(state: FormState, units: Units): FormState {
  return { ...state, units };
}

export function updateScenario(
  state: FormState,
  index: number,
  patch: Partial<ScenarioForm>,
): FormState {
  const scenarios = state.scenarios.map((s, i) => {
    if (i !== index) {
      return s;
    }
    const next = { ...s, ...patch };
    if (!durationEnabled(next)) {
      next.diabetesDurationYears = 0; // cleared and disabled unless t2d
    }
    return next;
  });
  return { ...state, scenarios };
}

export function validateState(state: FormState) {
  return state.scenarios.flatMap((s, i) => validateScenario(s, i));
}

const SMOKER_TO_WIRE: Record<SmokerChoice, boolean | null> = {
  yes: true,
  no: false,
  unknown: null,
};

export function toProfile(form: ScenarioForm): ScenarioProfile {
  return {
    age_years: form.ageYears,
    weight_kg: form.weightKg,
    height_m: form.heightM,
    smoker: SMOKER_TO_WIRE[form.smoker],
    diabetes_status: form.diabetesStatus,
    diabetes_duration_years: form.diabetesDurationYears,
    operation: form.operation,
  };
}

export function fromProfile(profile: ScenarioProfile): ScenarioForm {
  return {
    ageYears: profile.age_years,
    weightKg: profile.weight_kg,
    heightM: profile.height_m,
    smoker: profile.smoker === null ? "unknown" : profile.smoker ? "yes" : "no",
    diabetesStatus: profile.diabetes_status,
    diabetesDurationYears: profile.diabetes_duration_years,
    operation: profile.operation,
  };
}

export function toPredictRequest(state: FormState): PredictRequest {
  return { scenarios: state.scenarios.map(toProfile), units: state.units };
}

export function fromPredictRequest(request: PredictRequest): FormState {
  return { scenarios: request.scenarios.map(fromProfile), units: request.units };
}

export interface UnitOption {
  units: Units;
  label: string;
  enabled: boolean;
  tooltip?: string;
}

/** Unit selector entries; EWL is disabled with a tooltip when any scenario's
 * baseline BMI is 25 or less (the denominator would not be positive). */
export function unitOptions(state: FormState): UnitOption[] {
  const ewlOk = state.scenarios.every((s) => ewlAvailable(s));
  return [
    { units: "kg", label: "kg", enabled: true },
    { units: "bmi", label: "kg/m²", enabled: true },
    { units: "twl", label: "% TWL", enabled: true },
    {
      units: "ewl",
      label: "% EWL",
      enabled: ewlOk,
      ...(ewlOk ? {} : { tooltip: "EWL is undefined when the baseline BMI is 25 or less" }),
    },
  ];
}
