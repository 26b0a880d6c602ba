/** Wire types for the gateway API, as served to workers.
 *
 * These views are intentionally narrow: the server never sends ground
 * truth, race labels, or gold flags to a worker client, and nothing in
 * this package re-introduces them.
 */

export type Decision = "match" | "non_match";

export interface RegisteredWorker {
  worker_id: string;
  condition: string;
}

export interface AssignmentView {
  assignment_id: string;
  worker_id: string;
  policy: string;
  pair_ids: string[];
}

export interface PairView {
  pair_id: string;
  image_a: string;
  image_b: string;
}

export interface VerdictAck {
  sequence_number: number;
}

export interface VerdictPayload {
  worker_id: string;
  pair_id: string;
  decision: Decision;
  elapsed_ms: number;
}
