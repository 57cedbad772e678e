// DOM wiring: renders the chat model and stats panel, and owns the single
// in-flight request rule (input stays disabled until the response lands).

import { PolicyStats, ServiceApi } from "./api.js";
import { ChatModel, formatPercent, rewardBadge } from "./chat.js";

export interface AppElements {
  log: HTMLElement;
  input: HTMLInputElement;
  send: HTMLButtonElement;
  newTopic: HTMLButtonElement;
  statsPanel: HTMLElement;
  statVersion: HTMLElement;
  statUpdates: HTMLElement;
  statReward: HTMLElement;
}

export interface AppState {
  model: ChatModel;
  sessionId: string | null;
  newTopicArmed: boolean;
}

export interface AppHandles {
  state: AppState;
  els: AppElements;
  submit(): Promise<void>;
  refreshStats(): Promise<void>;
}

function byId<T extends HTMLElement>(doc: Document, id: string): T {
  const el = doc.getElementById(id);
  if (!el) throw new Error(`missing element #${id}`);
  return el as T;
}

export function grabElements(doc: Document): AppElements {
  return {
    log: byId(doc, "chat-log"),
    input: byId<HTMLInputElement>(doc, "utterance-input"),
    send: byId<HTMLButtonElement>(doc, "send-button"),
    newTopic: byId<HTMLButtonElement>(doc, "new-topic-button"),
    statsPanel: byId(doc, "stats-panel"),
    statVersion: byId(doc, "stat-version"),
    statUpdates: byId(doc, "stat-updates"),
    statReward: byId(doc, "stat-reward"),
  };
}

export function renderTurns(model: ChatModel, els: AppElements): void {
  const doc = els.log.ownerDocument;
  els.log.textContent = "";
  for (const turn of model.turns) {
    const item = doc.createElement("li");
    item.className = "turn";

    if (turn.newTopic) {
      const divider = doc.createElement("div");
      divider.className = "topic-divider";
      divider.textContent = "new topic";
      item.appendChild(divider);
    }

    const question = doc.createElement("div");
    question.className = "utterance";
    question.textContent = turn.utterance;
    const badge = rewardBadge(turn.reward);
    if (badge !== null) {
      const mark = doc.createElement("span");
      mark.className = `badge ${turn.reward! > 0 ? "badge-pos" : "badge-neg"}`;
      mark.textContent = badge;
      question.appendChild(mark);
    }
    item.appendChild(question);

    const answer = doc.createElement("div");
    answer.className = "answer";
    answer.textContent = turn.answerLabel ?? "(no answer)";
    item.appendChild(answer);

    const list = doc.createElement("ol");
    list.className = "candidates";
    for (const cand of turn.candidates) {
      const row = doc.createElement("li");
      row.textContent = `${cand.label} ${formatPercent(cand.score)}`;
      list.appendChild(row);
    }
    item.appendChild(list);

    const meta = doc.createElement("div");
    meta.className = "meta";
    const context = turn.detectedContext.length
      ? `context: ${turn.detectedContext.join(", ")}`
      : "context: (none)";
    meta.textContent = `${context} | model v${turn.modelVersion}`;
    item.appendChild(meta);

    els.log.appendChild(item);
  }
  if (model.lastError !== null) {
    const err = els.log.ownerDocument.createElement("li");
    err.className = "error";
    err.textContent = model.lastError;
    els.log.appendChild(err);
  }
}

export function renderStats(els: AppElements, stats: PolicyStats | null): void {
  if (stats === null) {
    els.statsPanel.classList.add("stale");
    return;
  }
  els.statsPanel.classList.remove("stale");
  els.statVersion.textContent = String(stats.modelVersion);
  els.statUpdates.textContent = String(stats.updatesApplied);
  els.statReward.textContent = stats.meanRecentReward.toFixed(2);
}

function setBusy(state: AppState, els: AppElements, busy: boolean): void {
  state.model.busy = busy;
  els.input.disabled = busy;
  els.send.disabled = busy;
}

export function wireApp(doc: Document, api: ServiceApi): AppHandles {
  const els = grabElements(doc);
  const state: AppState = { model: new ChatModel(), sessionId: null, newTopicArmed: false };

  async function submit(): Promise<void> {
    const text = els.input.value.trim();
    if (!text || state.model.busy) return;
    setBusy(state, els, true);
    const newTopic = state.newTopicArmed;
    try {
      if (state.sessionId === null) state.sessionId = await api.createSession();
      const payload = await api.sendUtterance(state.sessionId, text, newTopic);
      state.model.recordTurn(text, newTopic, payload);
      state.newTopicArmed = false;
      els.newTopic.classList.remove("armed");
      els.input.value = "";
    } catch (exc) {
      state.model.recordError(exc instanceof Error ? exc.message : String(exc));
    } finally {
      setBusy(state, els, false);
      renderTurns(state.model, els);
      els.input.focus();
    }
  }

  async function refreshStats(): Promise<void> {
    try {
      renderStats(els, await api.policyStats());
    } catch {
      renderStats(els, null);
    }
  }

  els.send.addEventListener("click", () => void submit());
  els.input.addEventListener("keydown", (ev: KeyboardEvent) => {
    if (ev.key === "Enter") void submit();
  });
  els.newTopic.addEventListener("click", () => {
    state.newTopicArmed = !state.newTopicArmed;
    els.newTopic.classList.toggle("armed", state.newTopicArmed);
  });

  return { state, els, submit, refreshStats };
}
