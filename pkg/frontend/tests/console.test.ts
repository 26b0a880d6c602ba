import { describe, expect, it } from "vitest";

import { GatewayClient, GatewayError } from "../src/api.js";
import { ConsoleSession, startSession } from "../src/session.js";
import type { Clock } from "../src/session.js";
import type { Decision } from "../src/types.js";
import { MockGateway, makePairRecords } from "./mock_gateway.js";

class FakeClock implements Clock {
  t = 1_000;
  now(): number {
    return this.t;
  }
  advance(ms: number): void {
    this.t += ms;
  }
}

const noSleep = () => Promise.resolve();

function setup(options: { pairCount?: number; assignmentSize?: number } = {}) {
  const gateway = new MockGateway(
    "exp-mock",
    makePairRecords(options.pairCount ?? 12),
    options.assignmentSize ?? 10,
  );
  const client = new GatewayClient("http://mock", gateway.fetchImpl);
  const clock = new FakeClock();
  return { gateway, client, clock };
}

async function answerAll(session: ConsoleSession, clock: FakeClock): Promise<Decision[]> {
  const sent: Decision[] = [];
  while (!session.complete) {
    await session.presentPair();
    clock.advance(700);
    const decision: Decision = session.cursor % 2 === 0 ? "match" : "non_match";
    await session.submitDecision(decision);
    sent.push(decision);
  }
  return sent;
}

describe("console round trip", () => {
  it("registers, claims, answers every pair, completes", async () => {
    const { gateway, client, clock } = setup();
    const session = await startSession(client, "Asian", "exp-mock", false, {
      clock,
      sleep: noSleep,
    });
    expect(session.total).toBe(10);
    expect(session.cursor).toBe(0);

    const sent = await answerAll(session, clock);
    expect(session.complete).toBe(true);
    expect(sent).toHaveLength(10);

    // exactly one server-side verdict per assigned pair
    for (const pairId of session.assignment.pair_ids) {
      expect(gateway.verdictCount(session.workerId, pairId)).toBe(1);
    }
    expect(gateway.verdicts.size).toBe(10);
  });

  it("records what was chosen, in order", async () => {
    const { gateway, client, clock } = setup();
    const session = await startSession(client, "Indian", "exp-mock", false, {
      clock,
      sleep: noSleep,
    });
    const sent = await answerAll(session, clock);
    session.assignment.pair_ids.forEach((pairId, i) => {
      const recorded = gateway.verdicts.get(`${session.workerId}:${pairId}`);
      expect(recorded?.decision).toBe(sent[i]);
    });
  });

  it("cursor only advances on acknowledgment", async () => {
    const { gateway, client, clock } = setup();
    gateway.faultPlan = ({ path }) =>
      path === "/api/verdicts" ? "drop_request" : "ok";
    const session = await startSession(client, "Asian", "exp-mock", false, {
      clock,
      sleep: noSleep,
      maxAttempts: 2,
    });
    await session.presentPair();
    await expect(session.submitDecision("match")).rejects.toThrow(/fetch failed/);
    expect(session.cursor).toBe(0);
    expect(session.submitted.size).toBe(0);
  });
});

describe("injected retries", () => {
  it("request loss: retries produce exactly one server verdict per pair", async () => {
    const { gateway, client, clock } = setup();
    // first two attempts of every submission vanish before the server
    gateway.faultPlan = ({ path, attempt }) =>
      path === "/api/verdicts" && attempt <= 2 ? "drop_request" : "ok";
    const session = await startSession(client, "Asian", "exp-mock", false, {
      clock,
      sleep: noSleep,
    });
    await answerAll(session, clock);
    expect(gateway.verdicts.size).toBe(10);
    for (const pairId of session.assignment.pair_ids) {
      expect(gateway.verdictCount(session.workerId, pairId)).toBe(1);
    }
  });

  it("response loss: duplicate_verdict reconciles and advances exactly once", async () => {
    const { gateway, client, clock } = setup();
    // the server records the first attempt but its response is lost
    gateway.faultPlan = ({ path, attempt }) =>
      path === "/api/verdicts" && attempt === 1 ? "drop_response" : "ok";
    const session = await startSession(client, "Asian", "exp-mock", false, {
      clock,
      sleep: noSleep,
    });
    await answerAll(session, clock);
    expect(session.complete).toBe(true);
    expect(gateway.verdicts.size).toBe(10);
    for (const pairId of session.assignment.pair_ids) {
      expect(gateway.verdictCount(session.workerId, pairId)).toBe(1);
    }
  });

  it("retries preserve the original elapsed_ms measurement", async () => {
    const { gateway, client, clock } = setup();
    gateway.faultPlan = ({ path, attempt }) =>
      path === "/api/verdicts" && attempt === 1 ? "drop_request" : "ok";
    const session = await startSession(client, "Asian", "exp-mock", false, {
      clock,
      // the retry happens later in wall-clock time
      sleep: () => {
        clock.advance(5_000);
        return Promise.resolve();
      },
    });
    await session.presentPair();
    clock.advance(1_234);
    await session.submitDecision("match");
    const pairId = session.assignment.pair_ids[0]!;
    const recorded = gateway.verdicts.get(`${session.workerId}:${pairId}`);
    expect(recorded?.elapsed_ms).toBe(1_234);
  });

  it("elapsed_ms is measured from first render and is non-negative", async () => {
    const { gateway, client, clock } = setup();
    const session = await startSession(client, "Asian", "exp-mock", false, {
      clock,
      sleep: noSleep,
    });
    await session.presentPair();
    await session.presentPair(); // re-render does not reset the stopwatch
    clock.advance(300);
    await session.presentPair();
    await session.submitDecision("non_match");
    const pairId = session.assignment.pair_ids[0]!;
    expect(gateway.verdicts.get(`${session.workerId}:${pairId}`)?.elapsed_ms).toBe(300);

    let last = -1;
    for (const verdict of gateway.verdicts.values()) {
      expect(verdict.elapsed_ms).toBeGreaterThanOrEqual(0);
      expect(verdict.sequence_number).toBeGreaterThan(last);
      last = verdict.sequence_number;
    }
  });

  it("exhausted retries surface the failure without advancing", async () => {
    const { gateway, client, clock } = setup();
    gateway.faultPlan = ({ path }) =>
      path === "/api/verdicts" ? "drop_request" : "ok";
    const session = await startSession(client, "Asian", "exp-mock", false, {
      clock,
      sleep: noSleep,
      maxAttempts: 3,
    });
    await session.presentPair();
    await expect(session.submitDecision("match")).rejects.toThrow();
    expect(session.cursor).toBe(0);
    expect(gateway.verdicts.size).toBe(0);
  });
});

describe("payload hygiene", () => {
  it("no server payload contains truth, race, or gold fields", async () => {
    const { gateway, client, clock } = setup();
    const session = await startSession(client, "Caucasian", "exp-mock", false, {
      clock,
      sleep: noSleep,
    });
    await answerAll(session, clock);

    const forbidden = ["truth", "race", "gold"];
    for (const body of gateway.servedBodies) {
      const keys = collectKeys(body);
      for (const key of keys) {
        for (const word of forbidden) {
          expect(key.toLowerCase()).not.toContain(word);
        }
      }
    }
    expect(gateway.servedBodies.length).toBeGreaterThan(10);
  });

  it("client session state holds no truth, race, or gold", async () => {
    const { client, clock } = setup();
    const session = await startSession(client, "Caucasian", "exp-mock", false, {
      clock,
      sleep: noSleep,
    });
    await session.presentPair();
    const snapshot = JSON.stringify({
      workerId: session.workerId,
      assignment: session.assignment,
      cursor: session.cursor,
      submitted: [...session.submitted.entries()],
    }).toLowerCase();
    for (const word of ["truth", "race_label", '"gold', "coded_race"]) {
      expect(snapshot).not.toContain(word);
    }
  });
});

describe("terminal states", () => {
  it("experiment_closed ends the session and blocks further submissions", async () => {
    const { gateway, client, clock } = setup();
    const session = await startSession(client, "Asian", "exp-mock", false, {
      clock,
      sleep: noSleep,
    });
    await session.presentPair();
    gateway.closed = true;
    await expect(session.submitDecision("match")).rejects.toBeInstanceOf(GatewayError);
    expect(session.terminal).toBe("experiment_closed");
    await expect(session.submitDecision("match")).rejects.toThrow(/session ended/);
    expect(session.cursor).toBe(0);
  });

  it("claiming twice returns the same assignment", async () => {
    const { gateway, client } = setup();
    const worker = await client.register("Asian");
    const first = await client.claim(worker.worker_id, "exp-mock");
    const second = await client.claim(worker.worker_id, "exp-mock");
    expect(second.assignment_id).toBe(first.assignment_id);
    expect(second.pair_ids).toEqual(first.pair_ids);
    expect(gateway.verdicts.size).toBe(0);
  });
});

function collectKeys(value: unknown, out: string[] = []): string[] {
  if (Array.isArray(value)) {
    for (const item of value) collectKeys(item, out);
  } else if (value !== null && typeof value === "object") {
    for (const [key, nested] of Object.entries(value as Record<string, unknown>)) {
      out.push(key);
      collectKeys(nested, out);
    }
  }
  return out;
}
