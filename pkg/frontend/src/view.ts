/** Pure render models for the console screens.
 *
 * The DOM layer turns these into elements; tests assert on them directly.
 */

import type { ConsoleSession } from "./session.js";
import type { PairView } from "./types.js";

export const CONTROLS = ["same person", "different person"] as const;

export const INSTRUCTIONS =
  "Look at both photos and decide whether they show the same person. " +
  "Answer every pair; you cannot go back.";

export interface PairScreen {
  kind: "pair";
  pairId: string;
  imageA: string;
  imageB: string;
  /** 1-based position of the pair on screen */
  index: number;
  total: number;
  progressLabel: string;
  controls: typeof CONTROLS;
  instructions: string;
}

export interface CompletionScreen {
  kind: "complete";
  total: number;
  message: string;
}

export interface ImageErrorScreen {
  kind: "image_error";
  pairId: string;
  progressLabel: string;
  retryLabel: string;
}

export interface TerminalScreen {
  kind: "terminal";
  reason: string;
  message: string;
}

export type Screen = PairScreen | CompletionScreen | ImageErrorScreen | TerminalScreen;

export function progressLabel(session: ConsoleSession): string {
  return `${Math.min(session.cursor + 1, session.total)} of ${session.total}`;
}

export function pairScreen(session: ConsoleSession, pair: PairView): PairScreen {
  return {
    kind: "pair",
    pairId: pair.pair_id,
    imageA: pair.image_a,
    imageB: pair.image_b,
    index: session.cursor + 1,
    total: session.total,
    progressLabel: progressLabel(session),
    controls: CONTROLS,
    instructions: INSTRUCTIONS,
  };
}

export function completionScreen(session: ConsoleSession): CompletionScreen {
  return {
    kind: "complete",
    total: session.total,
    message: `All ${session.total} pairs answered. Thank you!`,
  };
}

/** Shown when an image fails to load; the pair is kept, never skipped. */
export function imageErrorScreen(session: ConsoleSession, pairId: string): ImageErrorScreen {
  return {
    kind: "image_error",
    pairId,
    progressLabel: progressLabel(session),
    retryLabel: "Retry loading images",
  };
}

export function terminalScreen(reason: string): TerminalScreen {
  return {
    kind: "terminal",
    reason,
    message:
      reason === "experiment_closed"
        ? "This study has closed. No further answers can be submitted."
        : `The session ended: ${reason}`,
  };
}

export function screenFor(session: ConsoleSession, pair: PairView | null): Screen {
  if (session.terminal !== null) {
    return terminalScreen(session.terminal);
  }
  if (session.complete) {
    return completionScreen(session);
  }
  if (pair === null) {
    return imageErrorScreen(session, session.currentPairId()!);
  }
  return pairScreen(session, pair);
}
