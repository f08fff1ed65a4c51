/**
 * Browser entry point: webcam preview, face-landmark detection, and the
 * glue between the game flow, the countdown, and the DOM.
 *
 * The preview is mirrored with CSS only (players expect a mirror), while
 * capture draws from the raw stream, so the uploaded frame and landmark
 * coordinates are un-mirrored and need no correction. If a deployment
 * instead runs detection on a mirrored canvas, pass the result through
 * `unmirrorLandmarks` (coordinate flip plus symmetric index swap) before
 * uploading.
 */

import { ApiClient, ApiError } from "./api.js";
import { startCountdown, type CountdownHandle } from "./countdown.js";
import { mapMediaPipeTo68, type NormalizedPoint } from "./landmarks68.js";
import { GameFlow, type CaptureOutcome } from "./session.js";
import {
  clearBanner,
  renderBanner,
  renderCountdown,
  renderResult,
  renderRound,
  renderSummary,
} from "./view.js";

const MEDIAPIPE_CDN =
  "https://cdn.jsdelivr.net/npm/@mediapipe/tasks-vision@0.10.14";
const LANDMARKER_MODEL =
  "https://storage.googleapis.com/mediapipe-models/face_landmarker/face_landmarker/float16/1/face_landmarker.task";
const SESSION_STORAGE_KEY = "mimiclab.session_id";

interface FaceLandmarkerLike {
  detect(input: HTMLCanvasElement): {
    faceLandmarks: NormalizedPoint[][];
  };
}

interface MediaPipeVisionModule {
  FilesetResolver: {
    forVisionTasks(wasmBase: string): Promise<unknown>;
  };
  FaceLandmarker: {
    createFromOptions(
      fileset: unknown,
      options: {
        baseOptions: { modelAssetPath: string };
        runningMode: string;
        numFaces: number;
      },
    ): Promise<FaceLandmarkerLike>;
  };
}

async function loadDetector(): Promise<FaceLandmarkerLike> {
  const cdnUrl = MEDIAPIPE_CDN;
  const vision = (await import(cdnUrl)) as MediaPipeVisionModule;
  const fileset = await vision.FilesetResolver.forVisionTasks(
    `${MEDIAPIPE_CDN}/wasm`,
  );
  return vision.FaceLandmarker.createFromOptions(fileset, {
    baseOptions: { modelAssetPath: LANDMARKER_MODEL },
    runningMode: "IMAGE",
    numFaces: 1,
  });
}

function mustGet(id: string): HTMLElement {
  const el = document.getElementById(id);
  if (!el) throw new Error(`missing element #${id}`);
  return el;
}

async function openCamera(video: HTMLVideoElement): Promise<void> {
  const stream = await navigator.mediaDevices.getUserMedia({
    video: { width: { ideal: 640 }, height: { ideal: 480 } },
    audio: false,
  });
  video.srcObject = stream;
  await video.play();
  if (video.videoWidth === 0) {
    await new Promise<void>((resolve) =>
      video.addEventListener("loadedmetadata", () => resolve(), { once: true }),
    );
  }
}

function makeCapture(
  video: HTMLVideoElement,
  detector: FaceLandmarkerLike,
): () => Promise<CaptureOutcome> {
  const canvas = document.createElement("canvas");
  return async () => {
    const started = performance.now();
    canvas.width = video.videoWidth;
    canvas.height = video.videoHeight;
    const ctx = canvas.getContext("2d");
    if (!ctx) throw new Error("2d canvas context unavailable");
    ctx.drawImage(video, 0, 0);
    const frame = canvas.toDataURL("image/png").split(",", 2)[1];
    const detection = detector.detect(canvas);
    const mesh = detection.faceLandmarks[0];
    const landmarks =
      mesh === undefined
        ? null
        : mapMediaPipeTo68(mesh, canvas.width, canvas.height);
    return {
      frame,
      landmarks,
      capturedAt: new Date().toISOString(),
      captureMs: Math.round(performance.now() - started),
    };
  };
}

export async function boot(): Promise<void> {
  const banner = mustGet("banner");
  const target = mustGet("target");
  const countdownEl = mustGet("countdown");
  const resultEl = mustGet("result");
  const summaryEl = mustGet("summary");
  const video = mustGet("preview") as HTMLVideoElement;
  const startButton = mustGet("start-round") as HTMLButtonElement;
  const captureButton = mustGet("capture-now") as HTMLButtonElement;

  let detector: FaceLandmarkerLike;
  try {
    await openCamera(video);
    detector = await loadDetector();
  } catch (err) {
    renderBanner(
      banner,
      `Camera unavailable: ${String(err)}. Allow camera access and reload.`,
      "error",
    );
    startButton.disabled = true;
    captureButton.disabled = true;
    return;
  }

  const api = new ApiClient("");
  const flow = new GameFlow(api, makeCapture(video, detector));
  let countdown: CountdownHandle | null = null;

  const saved = window.localStorage.getItem(SESSION_STORAGE_KEY);
  try {
    if (saved) {
      await flow.resume(saved);
    } else {
      await flow.begin();
      window.localStorage.setItem(SESSION_STORAGE_KEY, flow.session.session_id);
    }
  } catch {
    await flow.begin();
    window.localStorage.setItem(SESSION_STORAGE_KEY, flow.session.session_id);
  }
  renderSummary(summaryEl, flow.summary());

  const beginCountdown = () => {
    countdown?.cancel();
    countdown = startCountdown(
      flow.config.countdown_seconds,
      (remaining) => renderCountdown(countdownEl, remaining),
      () => void submit(),
    );
  };

  const submit = async () => {
    if (flow.attemptInFlight) return;
    clearBanner(banner);
    let outcome;
    try {
      outcome = await flow.playAttempt();
    } catch (err) {
      const detail =
        err instanceof ApiError ? err.detail : String(err);
      renderBanner(banner, `Upload failed: ${detail}`, "error", () =>
        void submit(),
      );
      return;
    }
    if (outcome.kind === "no_face") {
      renderBanner(
        banner,
        "No face detected; attempt not used. Face the camera and try again.",
        "info",
        beginCountdown,
      );
      return;
    }
    if (outcome.kind === "rejected") {
      renderBanner(
        banner,
        `Frame rejected (${outcome.error.detail}); attempt not used.`,
        "info",
        beginCountdown,
      );
      return;
    }
    renderResult(resultEl, outcome.result, flow.session.group);
    renderSummary(summaryEl, flow.summary());
    if (flow.phase === "in_round") {
      beginCountdown();
    } else {
      renderCountdown(countdownEl, 0);
      startButton.textContent = "Next round";
      startButton.disabled = false;
    }
  };

  const startRound = async () => {
    clearBanner(banner);
    startButton.disabled = true;
    let round;
    try {
      round = await flow.nextRound();
    } catch (err) {
      const detail = err instanceof ApiError ? err.detail : String(err);
      renderBanner(banner, `Could not start round: ${detail}`, "error", () =>
        void startRound(),
      );
      startButton.disabled = false;
      return;
    }
    if (round === null) {
      renderSummary(summaryEl, flow.summary());
      renderBanner(banner, "Session complete. Thanks for playing!", "info");
      window.localStorage.removeItem(SESSION_STORAGE_KEY);
      return;
    }
    renderRound(target, round);
    renderSummary(summaryEl, flow.summary());
    beginCountdown();
  };

  startButton.addEventListener("click", () => void startRound());
  captureButton.addEventListener("click", () => {
    countdown?.cancel();
    void submit();
  });

  if (flow.phase === "in_round" && flow.currentRound) {
    renderRound(target, flow.currentRound);
    beginCountdown();
  }
}

if (typeof document !== "undefined" && document.getElementById("preview")) {
  void boot();
}
