/**
 * DOM rendering. Pure functions from state to elements; no fetch, no
 * timers. Prescriptions are rendered only for treatment-group sessions,
 * in exactly the order the server sent them.
 */

import type { AttemptResult, RoundInfo } from "./types.js";
import type { RoundLog } from "./session.js";

function clear(el: HTMLElement): void {
  while (el.firstChild) el.removeChild(el.firstChild);
}

function child(
  parent: HTMLElement,
  tag: string,
  className?: string,
  text?: string,
): HTMLElement {
  const el = parent.ownerDocument.createElement(tag);
  if (className) el.className = className;
  if (text !== undefined) el.textContent = text;
  parent.appendChild(el);
  return el;
}

export function formatScore(score: number): string {
  return score.toFixed(2);
}

/** Show the reference expression to imitate and the attempt budget. */
export function renderRound(container: HTMLElement, round: RoundInfo): void {
  clear(container);
  child(container, "h2", "round-title", `Round ${round.round_index + 1}: ${round.emotion}`);
  if (round.target_image) {
    const img = child(container, "img", "target-image") as HTMLImageElement;
    img.src = `data:image/png;base64,${round.target_image}`;
    img.alt = `reference expression: ${round.emotion}`;
  } else {
    child(
      container,
      "p",
      "target-placeholder",
      `Keep going: imitate ${round.emotion} (reference image not re-sent after reload).`,
    );
  }
  child(
    container,
    "p",
    "attempts-remaining",
    `Attempts remaining: ${round.attempts_remaining}`,
  );
}

export function renderCountdown(el: HTMLElement, remaining: number): void {
  el.textContent = remaining > 0 ? `Capturing in ${remaining}...` : "Captured!";
}

/**
 * Show one attempt's outcome. The ordered coaching list appears only when
 * the session is in the treatment group; control-group players see the
 * score alone.
 */
export function renderResult(
  container: HTMLElement,
  result: AttemptResult,
  group: string,
): void {
  clear(container);
  child(container, "p", "score", `Score: ${formatScore(result.score)}`);
  if (result.score === 1) {
    child(container, "p", "perfect", "Perfect match!");
  }
  if (group === "treatment" && result.prescriptions.length > 0) {
    const list = child(container, "ol", "prescriptions");
    for (const p of result.prescriptions) {
      child(list, "li", `prescription ${p.polarity}`, p.text);
    }
  }
}

/** Per-round score sequences shown at the end of a session. */
export function renderSummary(
  container: HTMLElement,
  logs: ReadonlyArray<RoundLog>,
): void {
  clear(container);
  child(container, "h2", "summary-title", "Session summary");
  const list = child(container, "ul", "summary");
  for (const log of logs) {
    const seq = log.scores.map(formatScore).join(" -> ");
    child(list, "li", "summary-round", `${log.emotion}: ${seq || "no attempts"}`);
  }
}

export type BannerKind = "info" | "error";

/** Camera and network problems surface here, with optional retry action. */
export function renderBanner(
  container: HTMLElement,
  message: string,
  kind: BannerKind,
  onRetry?: () => void,
): void {
  clear(container);
  const banner = child(container, "div", `banner ${kind}`, message);
  if (onRetry) {
    const button = child(banner, "button", "retry", "Retry") as HTMLButtonElement;
    button.addEventListener("click", onRetry);
  }
}

export function clearBanner(container: HTMLElement): void {
  clear(container);
}
