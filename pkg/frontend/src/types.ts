/**
 * Wire types of the prediction service (POST /api/v1/predict, GET /api/v1/meta).
 * Field names match the JSON schema exactly; the UI never invents numbers,
 * every displayed value originates from one of these payloads.
 */

export type Units = "kg" | "bmi" | "twl" | "ewl";
export type Operation = "RYGB" | "SG" | "AGB";
export type DiabetesStatus = "none" | "pre_t2d" | "t2d";

export interface ScenarioProfile {
  age_years: number;
  weight_kg: number;
  height_m: number;
  smoker: boolean | null;
  diabetes_status: DiabetesStatus;
  diabetes_duration_years: number;
  operation: Operation;
}

export interface PredictRequest {
  scenarios: ScenarioProfile[];
  units: Units;
}

export interface TrajectoryPoint {
  month: number;
  value: number;
  lo: number;
  hi: number;
}

export interface CurvePayload {
  months: number[];
  value: number[];
  lo: number[];
  hi: number[];
}

export interface ScenarioPayload {
  points: TrajectoryPoint[];
  curve: CurvePayload;
  ewl_available: boolean;
}

export interface PredictResponse {
  units: Units;
  model: {
    format_version: number;
    features: string[];
    model_hash: string;
  };
  scenarios: ScenarioPayload[];
}

export interface MetaResponse {
  format_version: number;
  features: string[];
  timepoints: number[];
  model_hash: string;
}

export interface FieldError {
  scenario?: number;
  field: string;
  message: string;
}
