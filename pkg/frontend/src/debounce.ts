/**
 * Rate limiting and response ordering for slider-style controls.
 *
 * A drag produces a burst of positions; the server takes seconds per request.
 * `throttleTrailing` keeps the request rate bounded while guaranteeing the
 * final position is sent; `LatestOnly` makes sure whatever response arrives
 * last-by-sequence is the only one applied (stale responses are dropped).
 */

export function throttleTrailing<A extends unknown[]>(
  fn: (...args: A) => void,
  minIntervalMs: number,
  now: () => number = Date.now,
): (...args: A) => void {
  let lastFire = -Infinity;
  let pending: A | null = null;
  let timer: ReturnType<typeof setTimeout> | null = null;

  const fire = (args: A) => {
    lastFire = now();
    fn(...args);
  };

  return (...args: A) => {
    const wait = lastFire + minIntervalMs - now();
    if (wait <= 0) {
      fire(args);
      return;
    }
    // remember only the newest position; older ones are obsolete by definition
    pending = args;
    if (timer === null) {
      timer = setTimeout(() => {
        timer = null;
        if (pending !== null) {
          const args2 = pending;
          pending = null;
          fire(args2);
        }
      }, wait);
    }
  };
}

/** Applies only the newest dispatched result; superseded ones are discarded. */
export class LatestOnly<T> {
  private seq = 0;

  /** Current sequence number, exposed for tests and debugging. */
  get sequence(): number {
    return this.seq;
  }

  async dispatch(work: () => Promise<T>, apply: (value: T) => void): Promise<boolean> {
    const ticket = ++this.seq;
    const value = await work();
    if (ticket !== this.seq) {
      return false; // a newer dispatch happened while we were in flight
    }
    apply(value);
    return true;
  }

  /** Drop anything currently in flight without issuing new work. */
  invalidate(): void {
    this.seq++;
  }
}
