/** Application wiring: one root element, full re-render on every state
 * change, DOM events delegated from the root. */

import { ApiClient } from "./api.js";
import { ChatController } from "./controller.js";
import { renderApp } from "./render.js";
import type { OverrideField, Profile } from "./types.js";

export function parseItems(raw: string): number[] {
  return raw
    .split(",")
    .map((part) => part.trim())
    .filter((part) => part.length > 0)
    .map((part) => Number(part))
    .filter((value) => Number.isInteger(value));
}

export function parseOverrideValue(field: OverrideField, raw: string): unknown {
  if (field === "recommendations") {
    return parseItems(raw);
  }
  const trimmed = raw.trim();
  return /^\d+$/.test(trimmed) ? Number(trimmed) : trimmed;
}

export function mountApp(root: HTMLElement, controller: ChatController): void {
  const rerender = () => {
    const draftBefore = root.querySelector<HTMLTextAreaElement>("#draft");
    const hadFocus = draftBefore !== null && document.activeElement === draftBefore;
    root.innerHTML = renderApp(controller.state);
    if (hadFocus) {
      root.querySelector<HTMLTextAreaElement>("#draft")?.focus();
    }
  };
  controller.onChange(rerender);

  root.addEventListener("change", (event) => {
    const target = event.target as HTMLElement;
    if (target.id === "system-select") {
      controller.selectSystem((target as HTMLSelectElement).value);
    }
  });

  root.addEventListener("input", (event) => {
    const target = event.target as HTMLElement;
    if (target.id === "draft") {
      controller.setDraft((target as HTMLTextAreaElement).value);
    }
  });

  root.addEventListener("submit", (event) => {
    const target = event.target as HTMLElement;
    if (target.id === "profile-form") {
      event.preventDefault();
      const items = root.querySelector<HTMLInputElement>("#profile-items");
      const sentences = root.querySelector<HTMLTextAreaElement>("#profile-sentences");
      const profile: Profile = {
        items: parseItems(items?.value ?? ""),
        sentences: (sentences?.value ?? "")
          .split("\n")
          .map((line) => line.trim())
          .filter((line) => line.length > 0),
      };
      void controller.startSession(profile);
    }
  });

  root.addEventListener("click", (event) => {
    const target = event.target as HTMLElement;
    if (target.id === "send") {
      void controller.send();
    } else if (target.id === "retry-send") {
      void controller.retry();
    } else if (target.id === "dismiss-error") {
      controller.dismissError();
    } else if (target.classList.contains("override-apply")) {
      const controls = target.closest<HTMLElement>(".override-controls");
      if (!controls || controls.classList.contains("disabled")) {
        return;
      }
      const turnId = Number(controls.dataset["turnId"]);
      const field = controls.querySelector<HTMLSelectElement>(".override-field")
        ?.value as OverrideField;
      const raw = controls.querySelector<HTMLInputElement>(".override-value")?.value ?? "";
      void controller.applyOverride(turnId, field, parseOverrideValue(field, raw));
    }
  });

  rerender();
}

export function boot(): void {
  const root = document.getElementById("app");
  if (!root) {
    throw new Error("missing #app root element");
  }
  const controller = new ChatController(new ApiClient(""));
  mountApp(root, controller);
  void controller.loadSystems();
}

declare global {
  interface Window {
    __CONVREC_NO_AUTOBOOT__?: boolean;
  }
}

if (typeof document !== "undefined" && !window.__CONVREC_NO_AUTOBOOT__) {
  if (document.readyState === "loading") {
    document.addEventListener("DOMContentLoaded", boot);
  } else if (document.getElementById("app")) {
    boot();
  }
}
