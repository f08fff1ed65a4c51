/** Wire-level payload shapes for the game server's HTTP API. */

export type Group = "control" | "treatment";
export type Mode = "experiment" | "free";
export type RoundStatus = "open" | "closed" | "exhausted";
export type Polarity = "add" | "remove";

/** Response of `POST /api/sessions`. */
export interface SessionInfo {
  session_id: string;
  group: Group;
  mode: Mode;
  attempts_per_round: number;
}

/** Response of `GET /api/config`. */
export interface ServerConfig {
  mode: Mode;
  attempts_per_round: number;
  countdown_seconds: number;
}

/** Response of `POST /api/sessions/{id}/rounds`. */
export interface RoundInfo {
  round_id: string;
  round_index: number;
  /** Emotion name to imitate, e.g. "happiness". */
  emotion: string;
  /** Base64-encoded PNG of the reference face. */
  target_image: string;
  attempts_remaining: number;
  countdown_seconds: number;
}

/** One coaching instruction attached to an attempt result. */
export interface Prescription {
  au: number;
  polarity: Polarity;
  region: string;
  text: string;
}

/** Response of `POST /api/rounds/{id}/attempts`. */
export interface AttemptResult {
  attempt_index: number;
  score: number;
  correct: number[];
  spurious: number[];
  missing: number[];
  prescriptions: Prescription[];
  retry_allowed: boolean;
  attempts_remaining: number;
}

/** Attempt entry inside a session history snapshot. */
export interface HistoryAttempt {
  attempt_index: number;
  score: number;
  captured_at: string;
}

/** Round entry inside a session history snapshot. */
export interface HistoryRound {
  round_id: string;
  round_index: number;
  target_id: string;
  /** Numeric emotion code (alphabetical encoding). */
  emotion: number;
  emotion_label: string;
  status: RoundStatus;
  attempts: HistoryAttempt[];
}

/** Response of `GET /api/sessions/{id}/history`. */
export interface SessionHistory {
  session_id: string;
  group: Group;
  mode: Mode;
  created_at: string;
  rounds: HistoryRound[];
}

/** Error body shape shared by every non-2xx response. */
export interface ErrorPayload {
  error: string;
  detail: string;
}

/** Request body of `POST /api/rounds/{id}/attempts`. */
export interface AttemptUpload {
  /** Base64-encoded PNG frame, un-mirrored (as the camera saw it). */
  frame: string;
  /** 68 [x, y] pixel coordinates in the same un-mirrored frame. */
  landmarks: ReadonlyArray<readonly [number, number]>;
  captured_at?: string;
  client_capture_ms?: number;
}

export type Point = readonly [number, number];
