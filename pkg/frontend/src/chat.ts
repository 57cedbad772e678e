// Chat view state. Turns mirror service payloads verbatim: candidate order
// and scores are taken as sent, and a turn's reward badge is only known once
// the next utterance's response reports what the engine applied.

import { TurnPayload } from "./api.js";

export type Reward = number | null;

export interface ChatTurn {
  utterance: string;
  newTopic: boolean;
  answerLabel: string | null;
  candidates: { label: string; score: number }[];
  detectedContext: string[];
  modelVersion: number;
  reward: Reward;
}

export function formatPercent(score: number): string {
  return (score * 100).toFixed(1) + "%";
}

export function rewardBadge(reward: Reward): string | null {
  if (reward === null) return null;
  return reward > 0 ? `+${reward}` : `${reward}`;
}

export class ChatModel {
  turns: ChatTurn[] = [];
  busy = false;
  lastError: string | null = null;

  // Appends the new turn and stamps the retrospective reward onto the
  // previous one, exactly as reported by the service.
  recordTurn(utterance: string, newTopic: boolean, payload: TurnPayload): ChatTurn {
    const prev = this.turns[this.turns.length - 1];
    if (prev) prev.reward = payload.rewardAppliedToPrevTurn;
    const turn: ChatTurn = {
      utterance,
      newTopic,
      answerLabel: payload.answer ? payload.answer.label : null,
      candidates: payload.candidates.map((c) => ({ label: c.label, score: c.score })),
      detectedContext: payload.contextEntities.map((e) => e.label),
      modelVersion: payload.modelVersion,
      reward: null,
    };
    this.turns.push(turn);
    this.lastError = null;
    return turn;
  }

  recordError(message: string): void {
    this.lastError = message;
  }
}
