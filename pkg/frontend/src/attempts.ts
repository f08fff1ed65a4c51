/**
 * Guard that keeps at most one attempt upload in flight.
 *
 * The capture button and the countdown can both try to submit; whichever
 * wins starts the upload, and any further submission while it is pending
 * is rejected instead of queued (a second frame taken later would not be
 * the expression the countdown captured).
 */

export class AttemptInFlightError extends Error {
  constructor() {
    super("an attempt upload is already in flight");
    this.name = "AttemptInFlightError";
  }
}

export class SingleFlight {
  private busy = false;

  get inFlight(): boolean {
    return this.busy;
  }

  async run<T>(task: () => Promise<T>): Promise<T> {
    if (this.busy) throw new AttemptInFlightError();
    this.busy = true;
    try {
      return await task();
    } finally {
      this.busy = false;
    }
  }
}
