/** Minimal browser binding: mounts the console into a root element.
 *
 * Plain DOM, no framework. Image-load failures show a retry control and
 * keep the cursor where it is; decisions are two mutually exclusive
 * buttons; progress and instructions stay visible on every pair.
 */

import { GatewayClient } from "./api.js";
import { ConsoleSession, startSession } from "./session.js";
import type { Decision, PairView } from "./types.js";
import { completionScreen, imageErrorScreen, pairScreen, terminalScreen } from "./view.js";

export interface MountConfig {
  baseUrl: string;
  experimentId: string;
}

export function mount(root: HTMLElement, config: MountConfig): void {
  const client = new GatewayClient(config.baseUrl);
  renderRegistration(root, client, config.experimentId);
}

function clear(node: HTMLElement): void {
  while (node.firstChild) node.removeChild(node.firstChild);
}

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  text?: string,
  className?: string,
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  if (text !== undefined) node.textContent = text;
  if (className !== undefined) node.className = className;
  return node;
}

function renderRegistration(root: HTMLElement, client: GatewayClient, experimentId: string): void {
  clear(root);
  const form = el("form", undefined, "console-register");
  form.appendChild(el("h1", "Face verification task"));
  form.appendChild(el("p", "Please self-identify your racial identity to begin."));
  const input = el("input");
  input.name = "self_identified_race";
  input.required = true;
  form.appendChild(input);
  const button = el("button", "Start");
  button.type = "submit";
  form.appendChild(button);
  form.addEventListener("submit", (event) => {
    event.preventDefault();
    button.disabled = true;
    startSession(client, input.value, experimentId)
      .then((session) => renderCurrent(root, session))
      .catch((error: unknown) => {
        button.disabled = false;
        form.appendChild(el("p", String(error), "console-error"));
      });
  });
  root.appendChild(form);
}

function renderCurrent(root: HTMLElement, session: ConsoleSession): void {
  if (session.terminal !== null) {
    renderTerminal(root, session.terminal);
    return;
  }
  if (session.complete) {
    renderCompletion(root, session);
    return;
  }
  session
    .presentPair()
    .then((pair) => renderPair(root, session, pair))
    .catch(() => renderImageError(root, session));
}

function renderPair(root: HTMLElement, session: ConsoleSession, pair: PairView): void {
  const screen = pairScreen(session, pair);
  clear(root);
  root.appendChild(el("p", screen.progressLabel, "console-progress"));
  root.appendChild(el("p", screen.instructions, "console-instructions"));

  const images = el("div", undefined, "console-images");
  let failures = 0;
  for (const src of [screen.imageA, screen.imageB]) {
    const img = el("img");
    img.src = src;
    img.addEventListener("error", () => {
      failures += 1;
      if (failures === 1) renderImageError(root, session);
    });
    images.appendChild(img);
  }
  root.appendChild(images);

  const controls = el("div", undefined, "console-controls");
  const decisions: Decision[] = ["match", "non_match"];
  screen.controls.forEach((label, i) => {
    const button = el("button", label);
    button.addEventListener("click", () => {
      for (const b of controls.querySelectorAll("button")) b.disabled = true;
      session
        .submitDecision(decisions[i]!)
        .then(() => renderCurrent(root, session))
        .catch(() => renderCurrent(root, session));
    });
    controls.appendChild(button);
  });
  root.appendChild(controls);
}

function renderImageError(root: HTMLElement, session: ConsoleSession): void {
  const screen = imageErrorScreen(session, session.currentPairId() ?? "");
  clear(root);
  root.appendChild(el("p", screen.progressLabel, "console-progress"));
  root.appendChild(el("p", "The images did not load.", "console-error"));
  const retry = el("button", screen.retryLabel);
  retry.addEventListener("click", () => renderCurrent(root, session));
  root.appendChild(retry);
}

function renderCompletion(root: HTMLElement, session: ConsoleSession): void {
  const screen = completionScreen(session);
  clear(root);
  root.appendChild(el("h1", screen.message, "console-complete"));
}

function renderTerminal(root: HTMLElement, reason: string): void {
  const screen = terminalScreen(reason);
  clear(root);
  root.appendChild(el("p", screen.message, "console-terminal"));
}
