export { GatewayClient, GatewayError } from "./api.js";
export type { FetchLike } from "./api.js";
export { ConsoleSession, startSession } from "./session.js";
export type { Clock, SessionOptions } from "./session.js";
export * from "./types.js";
export * from "./view.js";
export { mount } from "./dom.js";
