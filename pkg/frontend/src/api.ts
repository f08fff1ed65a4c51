/**
 * Thin typed client for the game server.
 *
 * Every player-facing payload is passed through a leak guard that rejects
 * any response carrying action-unit sets: the player must only ever see
 * scores and natural-language instructions, never the target's AU encoding.
 */

import type {
  AttemptResult,
  AttemptUpload,
  ErrorPayload,
  RoundInfo,
  ServerConfig,
  SessionHistory,
  SessionInfo,
} from "./types.js";

export type FetchLike = (
  input: string,
  init?: {
    method?: string;
    headers?: Record<string, string>;
    body?: string;
  },
) => Promise<{
  ok: boolean;
  status: number;
  json(): Promise<unknown>;
}>;

/** Error raised for any non-2xx server response. */
export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly code: string,
    readonly detail: string,
  ) {
    super(`${code}: ${detail}`);
    this.name = "ApiError";
  }
}

/** Error raised when a payload smuggles action-unit sets to the player. */
export class AuLeakError extends Error {
  constructor(key: string) {
    super(`payload contains forbidden action-unit field "${key}"`);
    this.name = "AuLeakError";
  }
}

const FORBIDDEN_KEYS = new Set(["aus", "target_aus", "player_aus"]);

/**
 * Walk a decoded JSON value and throw if any object key would reveal an
 * action-unit set. Keys like `target_id` are fine (they identify the image,
 * not its encoding); `correct`/`spurious`/`missing` AU numbers are part of
 * the feedback contract and stay.
 */
export function assertNoAuLeak(value: unknown): void {
  if (Array.isArray(value)) {
    for (const item of value) assertNoAuLeak(item);
    return;
  }
  if (value !== null && typeof value === "object") {
    for (const [key, item] of Object.entries(value)) {
      if (FORBIDDEN_KEYS.has(key)) throw new AuLeakError(key);
      assertNoAuLeak(item);
    }
  }
}

async function decode<T>(response: {
  ok: boolean;
  status: number;
  json(): Promise<unknown>;
}): Promise<T> {
  let body: unknown;
  try {
    body = await response.json();
  } catch {
    body = undefined;
  }
  if (!response.ok) {
    const err = (body ?? {}) as Partial<ErrorPayload>;
    throw new ApiError(
      response.status,
      err.error ?? "http_error",
      err.detail ?? `request failed with status ${response.status}`,
    );
  }
  assertNoAuLeak(body);
  return body as T;
}

export interface CreateSessionOptions {
  group_policy?: string;
  group?: string;
  player_meta?: Record<string, unknown>;
}

export class ApiClient {
  constructor(
    private readonly baseUrl: string = "",
    private readonly fetchImpl: FetchLike = fetch as unknown as FetchLike,
  ) {}

  private async request<T>(
    method: string,
    path: string,
    body?: unknown,
  ): Promise<T> {
    const init: Parameters<FetchLike>[1] = { method };
    if (body !== undefined) {
      init.headers = { "content-type": "application/json" };
      init.body = JSON.stringify(body);
    }
    let response: Awaited<ReturnType<FetchLike>>;
    try {
      response = await this.fetchImpl(this.baseUrl + path, init);
    } catch (cause) {
      throw new ApiError(0, "network_error", String(cause));
    }
    return decode<T>(response);
  }

  health(): Promise<{ status: string }> {
    return this.request("GET", "/api/health");
  }

  config(): Promise<ServerConfig> {
    return this.request("GET", "/api/config");
  }

  createSession(options: CreateSessionOptions = {}): Promise<SessionInfo> {
    return this.request("POST", "/api/sessions", options);
  }

  startRound(sessionId: string): Promise<RoundInfo> {
    return this.request(
      "POST",
      `/api/sessions/${encodeURIComponent(sessionId)}/rounds`,
    );
  }

  submitAttempt(roundId: string, upload: AttemptUpload): Promise<AttemptResult> {
    return this.request(
      "POST",
      `/api/rounds/${encodeURIComponent(roundId)}/attempts`,
      upload,
    );
  }

  sessionHistory(sessionId: string): Promise<SessionHistory> {
    return this.request(
      "GET",
      `/api/sessions/${encodeURIComponent(sessionId)}/history`,
    );
  }
}
