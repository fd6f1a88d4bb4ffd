/** Client-side session state and the sending state machine.
 *
 * The controller mirrors the server's session record and never invents
 * policy or recommendation content; every turn shown comes from a server
 * response. One request is in flight per session at a time: messages sent
 * while busy queue up and run in order. A failed send keeps the draft and
 * parks the machine in the error phase until retry or dismiss.
 */

import { ApiClient, ApiError } from "./api.js";
import type { OverrideField, Profile, Session, SystemInfo, Turn } from "./types.js";

export type Phase = "idle" | "sending" | "error";

export interface ViewState {
  systems: SystemInfo[];
  selectedSystem: string;
  formErrors: string[];
  session: Session | null;
  draft: string;
  phase: Phase;
  error: string | null;
  failedText: string | null;
  pendingOverride: { turnId: number; field: OverrideField } | null;
}

type Listener = (state: ViewState) => void;

export class ChatController {
  readonly state: ViewState = {
    systems: [],
    selectedSystem: "",
    formErrors: [],
    session: null,
    draft: "",
    phase: "idle",
    error: null,
    failedText: null,
    pendingOverride: null,
  };

  private listeners: Listener[] = [];
  private queue: string[] = [];

  constructor(private readonly api: ApiClient) {}

  onChange(listener: Listener): void {
    this.listeners.push(listener);
  }

  private emit(): void {
    for (const listener of this.listeners) {
      listener(this.state);
    }
  }

  async loadSystems(): Promise<void> {
    this.state.systems = await this.api.listSystems();
    this.emit();
  }

  selectSystem(systemId: string): void {
    this.state.selectedSystem = systemId;
    this.emit();
  }

  /** Create the session; validation problems land in formErrors inline. */
  async startSession(profile: Profile): Promise<void> {
    if (!this.state.selectedSystem) {
      this.state.formErrors = ["choose a system first"];
      this.emit();
      return;
    }
    try {
      this.state.session = await this.api.createSession(
        this.state.selectedSystem,
        profile,
      );
      this.state.formErrors = [];
    } catch (err) {
      this.state.formErrors = [describeError(err)];
    }
    this.emit();
  }

  setDraft(text: string): void {
    this.state.draft = text;
  }

  /** Send the current draft (or queue it while a request is in flight). */
  async send(): Promise<void> {
    const text = this.state.draft.trim();
    if (!text || !this.state.session) {
      return;
    }
    this.state.draft = "";
    if (this.state.phase === "sending") {
      this.queue.push(text);
      return;
    }
    await this.deliver(text);
  }

  private async deliver(text: string): Promise<void> {
    const session = this.state.session;
    if (!session) {
      return;
    }
    this.state.phase = "sending";
    this.state.error = null;
    this.emit();
    try {
      const turn = await this.api.sendMessage(session.session_id, text);
      session.turns.push(turn);
      this.state.phase = "idle";
      this.state.failedText = null;
    } catch (err) {
      // Draft comes back so nothing typed is lost.
      this.state.phase = "error";
      this.state.error = describeError(err);
      this.state.failedText = text;
      this.state.draft = text;
    }
    this.emit();
    if (this.state.phase === "idle" && this.queue.length > 0) {
      const next = this.queue.shift();
      if (next !== undefined) {
        await this.deliver(next);
      }
    }
  }

  /** Re-send the message that previously failed. */
  async retry(): Promise<void> {
    const text = this.state.failedText;
    if (this.state.phase !== "error" || text === null) {
      return;
    }
    this.state.phase = "idle";
    this.state.failedText = null;
    this.state.draft = "";
    await this.deliver(text);
  }

  dismissError(): void {
    if (this.state.phase === "error") {
      this.state.phase = "idle";
      this.state.error = null;
      this.emit();
    }
  }

  latestTurn(): Turn | null {
    const turns = this.state.session?.turns ?? [];
    return turns.length > 0 ? (turns[turns.length - 1] ?? null) : null;
  }

  /** Replace an intermediate output on the latest turn; the server re-runs
   * downstream components and returns the revised record. */
  async applyOverride(
    turnId: number,
    field: OverrideField,
    value: unknown,
  ): Promise<void> {
    const session = this.state.session;
    if (!session) {
      return;
    }
    const latest = this.latestTurn();
    if (!latest || latest.turn_id !== turnId) {
      this.state.error = "only the latest turn can be corrected";
      this.emit();
      return;
    }
    this.state.pendingOverride = { turnId, field };
    this.emit();
    try {
      const revised = await this.api.applyOverride(
        session.session_id,
        turnId,
        field,
        value,
      );
      session.turns[session.turns.length - 1] = revised;
      this.state.error = null;
    } catch (err) {
      this.state.error = describeError(err);
    }
    this.state.pendingOverride = null;
    this.emit();
  }

  /** Pull the authoritative session state back from the server. */
  async refetch(): Promise<void> {
    const session = this.state.session;
    if (!session) {
      return;
    }
    this.state.session = await this.api.getSession(session.session_id);
    this.emit();
  }
}

export function describeError(err: unknown): string {
  if (err instanceof ApiError) {
    const unknownItems = err.body.details?.["unknown_items"];
    if (Array.isArray(unknownItems) && unknownItems.length > 0) {
      return `unknown item id ${unknownItems.join(", ")}`;
    }
    return err.body.message;
  }
  return err instanceof Error ? err.message : String(err);
}
