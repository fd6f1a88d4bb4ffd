/** HTML rendering. Every view is a pure function of ViewState, and the app
 * always re-renders whole sections from the mirrored session, so what is on
 * screen can never drift from the server's records. The UI displays server
 * output only; nothing here computes recommendations or policies.
 */

import type { ViewState } from "./controller.js";
import type { Session, Turn } from "./types.js";

export function escapeHtml(value: unknown): string {
  return String(value)
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;")
    .replace(/'/g, "&#39;");
}

export function renderProfileForm(state: ViewState): string {
  const options = state.systems
    .map(
      (sys) => `<option value="${escapeHtml(sys.system_id)}"${
        sys.system_id === state.selectedSystem ? " selected" : ""
      }>${escapeHtml(sys.system_id)} — ${escapeHtml(sys.dataset)}</option>`,
    )
    .join("");
  const errors = state.formErrors
    .map((msg) => `<li class="form-error">${escapeHtml(msg)}</li>`)
    .join("");
  const disabled = state.selectedSystem ? "" : " disabled";
  return `
<form id="profile-form" class="profile-form">
  <h2>Simulated user setup</h2>
  <label>System
    <select id="system-select">
      <option value="">choose…</option>${options}
    </select>
  </label>
  <label>Interaction history (item ids, comma separated)
    <input id="profile-items" type="text" placeholder="e.g. 3, 14" />
  </label>
  <label>Profile sentences (one per line)
    <textarea id="profile-sentences" rows="2"></textarea>
  </label>
  <ul id="form-errors">${errors}</ul>
  <button id="start-session" type="submit"${disabled}>Start chatting</button>
</form>`;
}

function renderBubblePair(turn: Turn): string {
  const badge = renderBadge(turn);
  const response =
    turn.response === null ? "<em>(no conversation model)</em>" : escapeHtml(turn.response);
  return `
<div class="exchange" data-turn-id="${turn.turn_id}">
  <div class="bubble user">${escapeHtml(turn.user_text)}</div>
  <div class="bubble system">${badge}${response}</div>
</div>`;
}

function renderBadge(turn: Turn): string {
  const fields = Object.keys(turn.overrides_applied).sort();
  if (fields.length === 0) {
    return "";
  }
  return `<span class="override-badge" title="corrected by you">overridden: ${fields
    .map(escapeHtml)
    .join(", ")}</span>`;
}

export function renderTranscript(session: Session): string {
  return session.turns.map(renderBubblePair).join("");
}

function renderInspectorEntry(turn: Turn, isLatest: boolean, pending: boolean): string {
  const policy = turn.policy_output;
  const policyBlock = policy
    ? `<div class="policy">
        <span class="policy-label">policy: ${escapeHtml(policy.label)}</span>
        <ol class="policy-top">${policy.top
          .map(
            (choice) =>
              `<li>${escapeHtml(choice.label)} <span class="prob">${choice.prob.toFixed(4)}</span></li>`,
          )
          .join("")}</ol>
      </div>`
    : `<div class="policy none">no policy model</div>`;
  const recs = turn.recommendations ?? [];
  const recBlock = recs.length
    ? `<ol class="recs">${recs
        .map(
          (rec) =>
            `<li data-item-id="${rec.item_id}">${escapeHtml(rec.name)} <span class="score">${rec.score.toFixed(4)}</span></li>`,
        )
        .join("")}</ol>`
    : `<div class="recs none">no recommendation model</div>`;
  return `
<details class="inspector-entry" data-turn-id="${turn.turn_id}" open>
  <summary>turn ${turn.turn_id}${renderBadge(turn)}</summary>
  ${policyBlock}
  ${recBlock}
  ${renderOverrideControls(turn, isLatest, pending)}
</details>`;
}

export function renderOverrideControls(
  turn: Turn,
  isLatest: boolean,
  pending: boolean,
): string {
  const disabled = !isLatest || pending;
  const explanation = isLatest
    ? ""
    : `<span class="stale-note">only the latest turn can be corrected</span>`;
  const attr = disabled ? " disabled" : "";
  return `
<div class="override-controls${disabled ? " disabled" : ""}" data-turn-id="${turn.turn_id}">
  <select class="override-field"${attr}>
    <option value="recommendations">recommendations</option>
    <option value="policy">policy</option>
  </select>
  <input class="override-value" type="text"
         placeholder="item ids (3,1) or a policy label"${attr} />
  <button class="override-apply" type="button"${attr}>apply</button>
  ${explanation}
</div>`;
}

export function renderInspector(session: Session, pending: boolean): string {
  const last = session.turns.length;
  return session.turns
    .map((turn) => renderInspectorEntry(turn, turn.turn_id === last, pending))
    .join("");
}

export function renderChat(state: ViewState): string {
  const session = state.session;
  if (!session) {
    return "";
  }
  const banner =
    state.phase === "error"
      ? `<div class="retry-banner">send failed: ${escapeHtml(state.error ?? "")}
           <button id="retry-send" type="button">retry</button>
           <button id="dismiss-error" type="button">dismiss</button>
         </div>`
      : "";
  const closed = session.status === "closed";
  return `
<div class="chat-view" data-session-id="${escapeHtml(session.session_id)}">
  <section id="transcript">${renderTranscript(session)}</section>
  <aside id="inspector">${renderInspector(session, state.pendingOverride !== null)}</aside>
  <footer id="composer">
    ${banner}
    <textarea id="draft" rows="2"${closed ? " disabled" : ""}
      placeholder="${closed ? "session closed" : "say something…"}">${escapeHtml(state.draft)}</textarea>
    <button id="send" type="button"${closed || state.phase === "sending" ? " disabled" : ""}>
      ${state.phase === "sending" ? "sending…" : "send"}</button>
  </footer>
</div>`;
}

export function renderApp(state: ViewState): string {
  return state.session ? renderChat(state) : renderProfileForm(state);
}
