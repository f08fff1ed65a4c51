/**
 * Pre-capture countdown.
 *
 * Contract: after `start`, `onTick` reports the remaining whole seconds
 * (first synchronously with the full duration, then once per interval),
 * and when the count reaches zero `onFire` is invoked exactly once.
 * Cancelling before expiry suppresses the fire entirely; cancelling or
 * restarting after expiry can never produce a second fire.
 */

export interface TimerLike {
  setInterval(handler: () => void, ms: number): number;
  clearInterval(id: number): void;
}

export interface CountdownHandle {
  /** Stop the countdown; guarantees onFire will not be called afterwards. */
  cancel(): void;
  /** True once onFire has been invoked. */
  readonly fired: boolean;
  /** Remaining whole seconds (0 once fired). */
  readonly remaining: number;
}

const realTimer: TimerLike = {
  setInterval: (handler, ms) =>
    setInterval(handler, ms) as unknown as number,
  clearInterval: (id) => clearInterval(id),
};

export function startCountdown(
  seconds: number,
  onTick: (remaining: number) => void,
  onFire: () => void,
  timer: TimerLike = realTimer,
  intervalMs = 1000,
): CountdownHandle {
  if (!Number.isInteger(seconds) || seconds <= 0) {
    throw new RangeError(`countdown length must be a positive integer, got ${seconds}`);
  }
  let remaining = seconds;
  let fired = false;
  let cancelled = false;

  const finish = () => {
    timer.clearInterval(id);
  };

  const id = timer.setInterval(() => {
    if (cancelled || fired) {
      finish();
      return;
    }
    remaining -= 1;
    onTick(remaining);
    if (remaining <= 0) {
      fired = true;
      finish();
      onFire();
    }
  }, intervalMs);

  onTick(remaining);

  return {
    cancel() {
      cancelled = true;
      finish();
    },
    get fired() {
      return fired;
    },
    get remaining() {
      return remaining;
    },
  };
}
