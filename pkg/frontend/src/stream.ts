import type { AuditEvent, StreamStatus } from "./types.js";

export interface SseFrame {
  id?: string;
  event?: string;
  data?: string;
}

/** Incremental parser for text/event-stream bodies. Feed it chunks, get
 * complete frames back; partial frames are buffered across chunks. */
export class SseParser {
  private buffer = "";

  push(chunk: string): SseFrame[] {
    this.buffer += chunk;
    const frames: SseFrame[] = [];
    let cut;
    while ((cut = this.buffer.indexOf("\n\n")) >= 0) {
      const raw = this.buffer.slice(0, cut);
      this.buffer = this.buffer.slice(cut + 2);
      const frame: SseFrame = {};
      for (const line of raw.split("\n")) {
        if (line.startsWith(":")) continue; // keep-alive comment
        const sep = line.indexOf(": ");
        if (sep < 0) continue;
        const field = line.slice(0, sep);
        const value = line.slice(sep + 2);
        if (field === "id") frame.id = value;
        else if (field === "event") frame.event = value;
        else if (field === "data") frame.data = (frame.data ?? "") + value;
      }
      if (frame.id !== undefined || frame.event !== undefined || frame.data !== undefined) {
        frames.push(frame);
      }
    }
    return frames;
  }
}

export interface StreamCallbacks {
  onEvent: (event: AuditEvent) => void;
  onStatus: (status: StreamStatus) => void;
}

const MAX_BACKOFF_MS = 5000;

/** Server-sent event consumer over fetch streaming with gapless resume:
 * reconnects from the last seen sequence number, drops replays, and treats
 * a sequence jump as a signal to reconnect rather than silently skip. */
export class EventStream {
  private nextSeq = 0;
  private stopped = false;
  private backoff = 500;
  private fetchImpl: typeof fetch;

  constructor(
    private base: string,
    private callbacks: StreamCallbacks,
    fetchImpl?: typeof fetch,
    fromSeq = 0,
  ) {
    this.nextSeq = fromSeq;
    this.fetchImpl = fetchImpl ?? fetch;
  }

  get lastSeq(): number {
    return this.nextSeq - 1;
  }

  stop(): void {
    this.stopped = true;
  }

  async run(): Promise<void> {
    while (!this.stopped) {
      this.callbacks.onStatus(this.nextSeq === 0 ? "connecting" : "stale");
      try {
        const ended = await this.consumeOnce();
        if (ended) {
          this.callbacks.onStatus("ended");
          return;
        }
      } catch {
        // fall through to reconnect
      }
      if (this.stopped) return;
      this.callbacks.onStatus("stale");
      await sleep(this.backoff);
      this.backoff = Math.min(this.backoff * 2, MAX_BACKOFF_MS);
    }
  }

  /** One connection lifetime. Returns true when the server says the run is
   * complete, false when the connection dropped and a resume is needed. */
  private async consumeOnce(): Promise<boolean> {
    const response = await this.fetchImpl(
      `${this.base}/api/events?from_seq=${this.nextSeq}`,
    );
    if (!response.ok || !response.body) throw new Error(`stream http ${response.status}`);
    this.callbacks.onStatus("live");
    this.backoff = 500;
    const reader = response.body.getReader();
    const decoder = new TextDecoder();
    const parser = new SseParser();
    while (!this.stopped) {
      const { done, value } = await reader.read();
      if (done) return false;
      for (const frame of parser.push(decoder.decode(value, { stream: true }))) {
        if (frame.event === "end") return true;
        if (frame.data === undefined) continue;
        const event = JSON.parse(frame.data) as AuditEvent;
        if (event.seq < this.nextSeq) continue; // overlap from resume
        if (event.seq > this.nextSeq) {
          // a gap means we lost data mid-flight; resync from where we are
          reader.cancel().catch(() => undefined);
          return false;
        }
        this.nextSeq = event.seq + 1;
        this.callbacks.onEvent(event);
      }
    }
    reader.cancel().catch(() => undefined);
    return true;
  }
}

function sleep(ms: number): Promise<void> {
  return new Promise((resolve) => setTimeout(resolve, ms));
}
