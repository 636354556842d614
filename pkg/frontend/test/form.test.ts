import { describe, expect, test } from "vitest";

import {
  addScenario,
  defaultScenario,
  fromPredictRequest,
  initialState,
  removeScenario,
  setUnits,
  toPredictRequest,
  unitOptions,
  updateScenario,
  type FormState,
} from "../src/form.js";
import type { PredictRequest } from "../src/types.js";

describe("scenario management", () => {
  test("starts with one scenario and kg as the default display unit", () => {
    const state = initialState();
    expect(state.scenarios).toHaveLength(1);
    expect(state.units).toBe("kg");
  });

  test("caps at two scenarios", () => {
    let state = initialState();
    state = addScenario(state);
    expect(state.scenarios).toHaveLength(2);
    expect(addScenario(state).scenarios).toHaveLength(2);
  });

  test("never removes the last scenario", () => {
    let state = addScenario(initialState());
    state = removeScenario(state, 0);
    expect(state.scenarios).toHaveLength(1);
    expect(removeScenario(state, 0).scenarios).toHaveLength(1);
  });
});

describe("diabetes duration coupling", () => {
  test("switching status away from t2d clears and disables the duration", () => {
    let state = initialState();
    state = updateScenario(state, 0, { diabetesStatus: "t2d" });
    state = updateScenario(state, 0, { diabetesDurationYears: 8 });
    expect(state.scenarios[0].diabetesDurationYears).toBe(8);
    state = updateScenario(state, 0, { diabetesStatus: "none" });
    expect(state.scenarios[0].diabetesDurationYears).toBe(0);
  });

  test("duration edits are ignored while not t2d", () => {
    const state = updateScenario(initialState(), 0, { diabetesDurationYears: 5 });
    expect(state.scenarios[0].diabetesDurationYears).toBe(0);
  });
});

describe("request mapping", () => {
  test("smoker choices map to true/false/null", () => {
    let state = initialState();
    for (const [choice, wire] of [
      ["yes", true],
      ["no", false],
      ["unknown", null],
    ] as const) {
      state = updateScenario(state, 0, { smoker: choice });
      expect(toPredictRequest(state).scenarios[0].smoker).toBe(wire);
    }
  });

  test("form -> request -> form round trip is lossless", () => {
    let state: FormState = { scenarios: [defaultScenario()], units: "twl" };
    state = updateScenario(state, 0, {
      ageYears: 52,
      weightKg: 180,
      heightM: 1.66,
      smoker: "unknown",
      diabetesStatus: "t2d",
      operation: "SG",
    });
    state = updateScenario(state, 0, { diabetesDurationYears: 12 });
    state = addScenario(state);
    state = updateScenario(state, 1, { operation: "RYGB" });
    const request = toPredictRequest(state);
    expect(fromPredictRequest(request)).toEqual(state);
  });

  test("request -> form -> request round trip is lossless", () => {
    const request: PredictRequest = {
      units: "bmi",
      scenarios: [
        {
          age_years: 30,
          weight_kg: 150,
          height_m: 1.8,
          smoker: null,
          diabetes_status: "none",
          diabetes_duration_years: 0,
          operation: "RYGB",
        },
      ],
    };
    expect(toPredictRequest(fromPredictRequest(request))).toEqual(request);
  });
});

describe("unit options", () => {
  test("EWL disabled with a tooltip when any baseline BMI is at most 25", () => {
    let state = initialState();
    state = updateScenario(state, 0, { weightKg: 80, heightM: 1.8 }); // BMI 24.7
    const ewl = unitOptions(state).find((o) => o.units === "ewl")!;
    expect(ewl.enabled).toBe(false);
    expect(ewl.tooltip).toMatch(/BMI/);
    const others = unitOptions(state).filter((o) => o.units !== "ewl");
    expect(others.every((o) => o.enabled)).toBe(true);
  });

  test("EWL enabled for high baseline BMI", () => {
    const ewl = unitOptions(initialState()).find((o) => o.units === "ewl")!;
    expect(ewl.enabled).toBe(true);
    expect(ewl.tooltip).toBeUndefined();
  });

  test("unit switch keeps the form untouched", () => {
    const state = initialState();
    const switched = setUnits(state, "ewl");
    expect(switched.scenarios).toEqual(state.scenarios);
    expect(switched.units).toBe("ewl");
  });
});
