/** Console session state machine.
 *
 * One pair on screen at a time, forced choice, forward-only progress.
 * The cursor advances only after the server acknowledges a submission;
 * a `duplicate_verdict` rejection counts as acknowledgment, because it
 * means an earlier attempt was recorded and the response was lost. Each
 * pair's elapsed time is measured from its first render to the first
 * submit attempt, and retries resend that original measurement.
 */

import { GatewayClient, GatewayError } from "./api.js";
import type { AssignmentView, Decision, PairView } from "./types.js";

export interface Clock {
  now(): number;
}

export interface SessionOptions {
  clock?: Clock;
  /** total attempts per submission, including the first */
  maxAttempts?: number;
  retryDelayMs?: number;
  sleep?: (ms: number) => Promise<void>;
}

const defaultSleep = (ms: number) => new Promise<void>((resolve) => setTimeout(resolve, ms));

export class ConsoleSession {
  readonly workerId: string;
  readonly experimentId: string;
  readonly assignment: AssignmentView;
  /** index of the next unanswered pair */
  cursor = 0;
  readonly submitted = new Map<string, Decision>();
  /** set when the current pair first rendered; null between pairs */
  renderedAt: number | null = null;
  /** terminal error code (e.g. experiment_closed), ends the session */
  terminal: string | null = null;

  private readonly client: GatewayClient;
  private readonly clock: Clock;
  private readonly maxAttempts: number;
  private readonly retryDelayMs: number;
  private readonly sleep: (ms: number) => Promise<void>;
  private inFlight = false;

  constructor(
    client: GatewayClient,
    workerId: string,
    experimentId: string,
    assignment: AssignmentView,
    options: SessionOptions = {},
  ) {
    this.client = client;
    this.workerId = workerId;
    this.experimentId = experimentId;
    this.assignment = assignment;
    this.clock = options.clock ?? { now: () => Date.now() };
    this.maxAttempts = options.maxAttempts ?? 5;
    this.retryDelayMs = options.retryDelayMs ?? 250;
    this.sleep = options.sleep ?? defaultSleep;
  }

  get total(): number {
    return this.assignment.pair_ids.length;
  }

  get complete(): boolean {
    return this.cursor >= this.total;
  }

  currentPairId(): string | null {
    return this.complete ? null : this.assignment.pair_ids[this.cursor]!;
  }

  /** Fetch the current pair's metadata and stamp its first render time. */
  async presentPair(): Promise<PairView> {
    const pairId = this.currentPairId();
    if (pairId === null) {
      throw new Error("session is complete; nothing to present");
    }
    const pair = await this.client.pair(pairId);
    if (this.renderedAt === null) {
      this.renderedAt = this.clock.now();
    }
    return pair;
  }

  /**
   * Submit a decision for the current pair and advance on acknowledgment.
   *
   * Network failures are retried with the original elapsed_ms; a
   * duplicate_verdict response reconciles (an earlier attempt landed).
   * Returns the recorded decision's pair id.
   */
  async submitDecision(decision: Decision): Promise<string> {
    if (this.terminal !== null) {
      throw new Error(`session ended: ${this.terminal}`);
    }
    if (this.inFlight) {
      throw new Error("a submission is already in flight");
    }
    const pairId = this.currentPairId();
    if (pairId === null) {
      throw new Error("session is complete; nothing to submit");
    }
    const renderedAt = this.renderedAt ?? this.clock.now();
    const elapsed = Math.max(0, this.clock.now() - renderedAt);
    const payload = {
      worker_id: this.workerId,
      pair_id: pairId,
      decision,
      elapsed_ms: elapsed,
    };

    this.inFlight = true;
    try {
      let attempt = 0;
      for (;;) {
        attempt += 1;
        try {
          await this.client.submit(payload);
          break;
        } catch (error) {
          if (error instanceof GatewayError) {
            if (error.code === "duplicate_verdict") {
              break; // recorded by a previous attempt
            }
            if (error.code === "experiment_closed") {
              this.terminal = error.code;
              throw error;
            }
            throw error;
          }
          // network failure: retry with the original payload
          if (attempt >= this.maxAttempts) {
            throw error;
          }
          await this.sleep(this.retryDelayMs);
        }
      }
      this.submitted.set(pairId, decision);
      this.cursor += 1;
      this.renderedAt = null;
      return pairId;
    } finally {
      this.inFlight = false;
    }
  }
}

/** Register a worker, claim their assignment, and open a session. */
export async function startSession(
  client: GatewayClient,
  selfIdentifiedRace: string,
  experimentId: string,
  priorExperience = false,
  options: SessionOptions = {},
): Promise<ConsoleSession> {
  const worker = await client.register(selfIdentifiedRace, priorExperience);
  const assignment = await client.claim(worker.worker_id, experimentId);
  return new ConsoleSession(client, worker.worker_id, experimentId, assignment, options);
}
