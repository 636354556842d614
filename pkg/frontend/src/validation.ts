/**
 * Client-side scenario validation, mirroring the service's field rules so the
 * form can flag problems before a request is issued.  The server remains the
 * authority; these bounds are the calculator's input envelope.
 */

import type { DiabetesStatus, FieldError, Operation } from "./types.js";

export type SmokerChoice = "yes" | "no" | "unknown";

export interface ScenarioForm {
  ageYears: number;
  weightKg: number;
  heightM: number;
  smoker: SmokerChoice;
  diabetesStatus: DiabetesStatus;
  diabetesDurationYears: number;
  operation: Operation;
}

export const AGE_RANGE: readonly [number, number] = [18, 74];
export const WEIGHT_RANGE_KG: readonly [number, number] = [65, 295];
export const HEIGHT_RANGE_M: readonly [number, number] = [1.0, 2.5];

const OPERATIONS: readonly Operation[] = ["RYGB", "SG", "AGB"];
const DIABETES: readonly DiabetesStatus[] = ["none", "pre_t2d", "t2d"];

/** True exactly when the duration input should be editable. */
export function durationEnabled(form: Pick<ScenarioForm, "diabetesStatus">): boolean {
  return form.diabetesStatus === "t2d";
}

export function validateScenario(form: ScenarioForm, scenario = 0): FieldError[] {
  const errors: FieldError[] = [];
  const push = (field: string, message: string) => errors.push({ scenario, field, message });

  if (!Number.isFinite(form.ageYears) || form.ageYears < AGE_RANGE[0] || form.ageYears > AGE_RANGE[1]) {
    push("age_years", `age must be between ${AGE_RANGE[0]} and ${AGE_RANGE[1]} years`);
  }
  if (
    !Number.isFinite(form.weightKg) ||
    form.weightKg < WEIGHT_RANGE_KG[0] ||
    form.weightKg > WEIGHT_RANGE_KG[1]
  ) {
    push("weight_kg", `weight must be between ${WEIGHT_RANGE_KG[0]} and ${WEIGHT_RANGE_KG[1]} kg`);
  }
  if (
    !Number.isFinite(form.heightM) ||
    form.heightM <= HEIGHT_RANGE_M[0] ||
    form.heightM >= HEIGHT_RANGE_M[1]
  ) {
    push("height_m", `height must be between ${HEIGHT_RANGE_M[0]} and ${HEIGHT_RANGE_M[1]} m`);
  }
  if (!DIABETES.includes(form.diabetesStatus)) {
    push("diabetes_status", "choose a diabetes status");
  }
  if (form.diabetesStatus === "t2d") {
    if (!Number.isFinite(form.diabetesDurationYears) || form.diabetesDurationYears < 0) {
      push("diabetes_duration_years", "diabetes duration cannot be negative");
    }
  } else if (form.diabetesDurationYears !== 0) {
    push("diabetes_duration_years", "duration applies only with type 2 diabetes");
  }
  if (!OPERATIONS.includes(form.operation)) {
    push("operation", "choose an operation");
  }
  return errors;
}

/** Baseline BMI implied by the form; EWL display needs it above 25. */
export function baselineBmi(form: Pick<ScenarioForm, "weightKg" | "heightM">): number {
  return form.weightKg / (form.heightM * form.heightM);
}

export function ewlAvailable(form: Pick<ScenarioForm, "weightKg" | "heightM">): boolean {
  return baselineBmi(form) > 25;
}
