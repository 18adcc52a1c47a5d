/** View store: the last server payload plus UI-only ephemera (log, toast,
 * picker). The displayed configuration is always the payload, untouched. */

import type { Pair, SessionState } from "./api.js";

export interface LogEntry {
  step: number;
  text: string;
}

export interface BranchRequest {
  pair: Pair;
  outcomes: number;
}

export interface ViewState {
  session: SessionState | null;
  log: LogEntry[];
  toast: string | null;
  stale: boolean;
  inflight: boolean;
  picker: BranchRequest | null;
  chooser: Pair[] | null; // both orientations of a clicked edge
}

export type Listener = (state: ViewState) => void;

export class Store {
  private state: ViewState = {
    session: null,
    log: [],
    toast: null,
    stale: false,
    inflight: false,
    picker: null,
    chooser: null,
  };
  private listeners: Listener[] = [];

  get(): ViewState {
    return this.state;
  }

  subscribe(fn: Listener): void {
    this.listeners.push(fn);
  }

  update(patch: Partial<ViewState>): void {
    this.state = { ...this.state, ...patch };
    for (const fn of this.listeners) fn(this.state);
  }

  setSession(session: SessionState, logText?: string): void {
    const log = logText
      ? [...this.state.log, { step: session.step_index, text: logText }]
      : this.state.log;
    this.update({ session, log, toast: null, stale: false, picker: null, chooser: null });
  }
}

export function pairKey(pair: Pair): string {
  return `${pair[0]}-${pair[1]}`;
}

export function enabledOutcomes(session: SessionState, pair: Pair): number {
  const i = session.enabled.findIndex((p) => p[0] === pair[0] && p[1] === pair[1]);
  return i < 0 ? 0 : session.enabled_outcomes[i] ?? 1;
}

export function isEnabled(session: SessionState, pair: Pair): boolean {
  return session.enabled.some((p) => p[0] === pair[0] && p[1] === pair[1]);
}
