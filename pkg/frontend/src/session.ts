/**
 * Game flow orchestration, independent of DOM and camera specifics.
 *
 * Owns the session lifecycle (begin or resume), the per-round attempt
 * bookkeeping mirrored from server responses, and the rule that a frame
 * with no detected face never reaches the server and never costs an
 * attempt.
 */

import { ApiError } from "./api.js";
import type { CreateSessionOptions } from "./api.js";
import { SingleFlight } from "./attempts.js";
import type {
  AttemptResult,
  AttemptUpload,
  Point,
  RoundInfo,
  ServerConfig,
  SessionHistory,
  SessionInfo,
} from "./types.js";

/** The slice of the HTTP client the game flow needs (ApiClient satisfies it). */
export interface GameApi {
  config(): Promise<ServerConfig>;
  createSession(options?: CreateSessionOptions): Promise<SessionInfo>;
  startRound(sessionId: string): Promise<RoundInfo>;
  submitAttempt(roundId: string, upload: AttemptUpload): Promise<AttemptResult>;
  sessionHistory(sessionId: string): Promise<SessionHistory>;
}

/** What the camera layer hands over for one capture. */
export interface CaptureOutcome {
  /** Base64 PNG of the un-mirrored frame. */
  frame: string;
  /** 68 canonical points in un-mirrored pixel coordinates, or null if no face was found. */
  landmarks: ReadonlyArray<Point> | null;
  capturedAt?: string;
  captureMs?: number;
}

export type CaptureSource = () => Promise<CaptureOutcome>;

export type AttemptOutcome =
  | { kind: "no_face" }
  | { kind: "scored"; result: AttemptResult }
  | { kind: "rejected"; error: ApiError };

export interface RoundLog {
  roundId: string;
  roundIndex: number;
  emotion: string;
  scores: number[];
  /** "open" while playable, "done" once closed or exhausted. */
  status: "open" | "done";
}

export type Phase = "idle" | "between_rounds" | "in_round" | "complete";

export class GameFlow {
  private sessionInfo: SessionInfo | null = null;
  private serverConfig: ServerConfig | null = null;
  private rounds: RoundLog[] = [];
  private round: RoundInfo | null = null;
  private remaining = 0;
  private flowPhase: Phase = "idle";
  private readonly gate = new SingleFlight();

  constructor(
    private readonly api: GameApi,
    private readonly capture: CaptureSource,
  ) {}

  get session(): SessionInfo {
    if (!this.sessionInfo) throw new Error("no active session");
    return this.sessionInfo;
  }

  get config(): ServerConfig {
    if (!this.serverConfig) throw new Error("no active session");
    return this.serverConfig;
  }

  get phase(): Phase {
    return this.flowPhase;
  }

  get currentRound(): RoundInfo | null {
    return this.round;
  }

  get attemptsRemaining(): number {
    return this.remaining;
  }

  get attemptInFlight(): boolean {
    return this.gate.inFlight;
  }

  /** Round-by-round record (emotion plus the score of every attempt). */
  summary(): ReadonlyArray<RoundLog> {
    return this.rounds;
  }

  async begin(options: CreateSessionOptions = {}): Promise<SessionInfo> {
    this.serverConfig = await this.api.config();
    this.sessionInfo = await this.api.createSession(options);
    this.rounds = [];
    this.round = null;
    this.flowPhase = "between_rounds";
    return this.sessionInfo;
  }

  /**
   * Rebuild state for an existing session after a page reload. Completed
   * rounds come back with their score sequences; if the newest round is
   * still open with attempts left, play continues on that round (its
   * reference image is not re-sent, so the view shows a placeholder until
   * the next round starts).
   */
  async resume(sessionId: string): Promise<SessionInfo> {
    this.serverConfig = await this.api.config();
    const history = await this.api.sessionHistory(sessionId);
    this.sessionInfo = {
      session_id: history.session_id,
      group: history.group,
      mode: history.mode,
      attempts_per_round: this.serverConfig.attempts_per_round,
    };
    this.rounds = history.rounds.map((r) => ({
      roundId: r.round_id,
      roundIndex: r.round_index,
      emotion: r.emotion_label,
      scores: r.attempts.map((a) => a.score),
      status: r.status === "open" ? "open" : "done",
    }));
    this.round = null;
    this.flowPhase = "between_rounds";

    const last = history.rounds[history.rounds.length - 1];
    if (last && last.status === "open") {
      const used = last.attempts.length;
      const cap = this.serverConfig.attempts_per_round;
      if (used < cap) {
        this.round = {
          round_id: last.round_id,
          round_index: last.round_index,
          emotion: last.emotion_label,
          target_image: "",
          attempts_remaining: cap - used,
          countdown_seconds: this.serverConfig.countdown_seconds,
        };
        this.remaining = cap - used;
        this.flowPhase = "in_round";
      }
    }
    return this.sessionInfo;
  }

  /** Start the next round, or return null once the session is complete. */
  async nextRound(): Promise<RoundInfo | null> {
    const session = this.session;
    try {
      this.round = await this.api.startRound(session.session_id);
    } catch (err) {
      if (err instanceof ApiError && err.code === "session_complete") {
        this.round = null;
        this.flowPhase = "complete";
        return null;
      }
      throw err;
    }
    const openLog = this.rounds[this.rounds.length - 1];
    if (openLog && openLog.status === "open") openLog.status = "done";
    this.rounds.push({
      roundId: this.round.round_id,
      roundIndex: this.round.round_index,
      emotion: this.round.emotion,
      scores: [],
      status: "open",
    });
    this.remaining = this.round.attempts_remaining;
    this.flowPhase = "in_round";
    return this.round;
  }

  /**
   * Capture one frame and submit it for the current round.
   *
   * A frame with no detected face is reported as `no_face` and nothing is
   * sent, so the attempt budget is untouched; the player just retries.
   * Server-side rejections of the upload (unreadable image, malformed
   * landmarks) come back as `rejected`, which also leaves the budget
   * untouched. Only a scored response consumes an attempt.
   */
  async playAttempt(): Promise<AttemptOutcome> {
    const round = this.round;
    if (!round || this.flowPhase !== "in_round") {
      throw new Error("no open round to play");
    }
    return this.gate.run(async () => {
      const shot = await this.capture();
      if (shot.landmarks === null) {
        return { kind: "no_face" } as const;
      }
      let result: AttemptResult;
      try {
        result = await this.api.submitAttempt(round.round_id, {
          frame: shot.frame,
          landmarks: shot.landmarks,
          captured_at: shot.capturedAt,
          client_capture_ms: shot.captureMs,
        });
      } catch (err) {
        if (err instanceof ApiError && err.status === 422) {
          return { kind: "rejected", error: err } as const;
        }
        throw err;
      }
      const log = this.rounds[this.rounds.length - 1];
      log.scores.push(result.score);
      this.remaining = result.attempts_remaining;
      if (result.score === 1 || result.attempts_remaining === 0) {
        log.status = "done";
        this.round = null;
        this.flowPhase = "between_rounds";
      }
      return { kind: "scored", result } as const;
    });
  }
}
