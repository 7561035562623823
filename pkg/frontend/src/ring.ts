/** Fixed-capacity ring buffer used for telemetry trails.
 *
 * Pushing beyond capacity silently evicts the oldest entry, so memory stays
 * bounded no matter how long a session runs.
 */
export class Ring<T> {
  private readonly buf: (T | undefined)[];
  private head = 0; // index of the oldest element
  private count = 0;

  constructor(readonly capacity: number) {
    if (!Number.isInteger(capacity) || capacity <= 0) {
      throw new Error("ring capacity must be a positive integer");
    }
    this.buf = new Array<T | undefined>(capacity);
  }

  get length(): number {
    return this.count;
  }

  push(item: T): void {
    const tail = (this.head + this.count) % this.capacity;
    this.buf[tail] = item;
    if (this.count < this.capacity) {
      this.count += 1;
    } else {
      this.head = (this.head + 1) % this.capacity;
    }
  }

  /** Oldest-to-newest snapshot. */
  toArray(): T[] {
    const out: T[] = [];
    for (let i = 0; i < this.count; i++) {
      out.push(this.buf[(this.head + i) % this.capacity] as T);
    }
    return out;
  }

  at(i: number): T {
    if (i < 0 || i >= this.count) {
      throw new RangeError(`index ${i} out of range for length ${this.count}`);
    }
    return this.buf[(this.head + i) % this.capacity] as T;
  }

  get last(): T | undefined {
    if (this.count === 0) return undefined;
    return this.buf[(this.head + this.count - 1) % this.capacity];
  }

  clear(): void {
    this.head = 0;
    this.count = 0;
    this.buf.fill(undefined);
  }
}
