/**
 * Prediction-service client.  Field-level validation failures surface as
 * `ApiValidationError` (rendered inline next to the inputs); everything else,
 * including network failures, surfaces as `ApiUnavailableError` (rendered as
 * a retriable banner; the form state is never discarded).
 */

import type { FieldError, MetaResponse, PredictRequest, PredictResponse } from "./types.js";

export class ApiValidationError extends Error {
  constructor(
    public readonly status: number,
    public readonly fieldErrors: FieldError[],
  ) {
    super(`request rejected (${status})`);
  }
}

export class ApiUnavailableError extends Error {}

export class ApiClient {
  constructor(private readonly baseUrl: string = "") {}

  async predict(request: PredictRequest, signal?: AbortSignal): Promise<PredictResponse> {
    let response: Response;
    try {
      response = await fetch(`${this.baseUrl}/api/v1/predict`, {
        method: "POST",
        headers: { "Content-Type": "application/json" },
        body: JSON.stringify(request),
        ...(signal ? { signal } : {}),
      });
    } catch (err) {
      if (err instanceof DOMException && err.name === "AbortError") {
        throw err;
      }
      throw new ApiUnavailableError("prediction service unreachable");
    }
    if (response.status === 400 || response.status === 422) {
      const body = await response.json().catch(() => ({ detail: [] }));
      const detail = Array.isArray(body.detail) ? (body.detail as FieldError[]) : [];
      throw new ApiValidationError(response.status, detail);
    }
    if (!response.ok) {
      throw new ApiUnavailableError(`prediction service error (${response.status})`);
    }
    return (await response.json()) as PredictResponse;
  }

  async meta(): Promise<MetaResponse> {
    let response: Response;
    try {
      response = await fetch(`${this.baseUrl}/api/v1/meta`);
    } catch {
      throw new ApiUnavailableError("prediction service unreachable");
    }
    if (!response.ok) {
      throw new ApiUnavailableError(`prediction service error (${response.status})`);
    }
    return (await response.json()) as MetaResponse;
  }
}
