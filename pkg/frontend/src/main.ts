/** Wiring: the human is the scheduler. Clicks turn into step/fault/override
 * requests; responses replace the view wholesale. Requests are serialized:
 * clicks while one is in flight are ignored. */

import { ApiError, Pair, SessionApi, SessionRequest } from "./api.js";
import { Handlers, render } from "./render.js";
import { Store, enabledOutcomes } from "./state.js";

export class App {
  readonly store = new Store();
  private api: SessionApi;

  constructor(private root: HTMLElement, baseUrl: string = "") {
    this.api = new SessionApi(baseUrl);
    this.store.subscribe((state) => render(this.root, state, this.handlers));
    render(this.root, this.store.get(), this.handlers);
  }

  private handlers: Handlers = {
    onPairClick: (pair) => void this.requestStep(pair),
    onEdgeClick: (orientations) => {
      if (this.store.get().inflight) return;
      if (orientations.length === 1) {
        void this.requestStep(orientations[0]);
      } else {
        this.store.update({ chooser: orientations });
      }
    },
    onChooserPick: (pair) => void this.requestStep(pair),
    onNodeClick: (node) => void this.toggleAgent(node),
    onBranchPick: (pair, choice) => void this.performStep(pair, choice),
    onOverride: (node, value) => void this.guard(() => this.api.overrideOracle(this.sid(), { node, value }), `override node ${node} := ${value ? "T" : "F"}`),
    onClearOverrides: () => void this.guard(() => this.api.overrideOracle(this.sid(), { clear: true }), "overrides cleared"),
    onRefresh: () => void this.refresh(),
  };

  private sid(): string {
    const session = this.store.get().session;
    if (!session) throw new Error("no session");
    return session.id;
  }

  async createSession(req: SessionRequest): Promise<void> {
    const state = await this.api.createSession(req);
    this.store.setSession(state, `session ${state.id} created`);
  }

  async refresh(): Promise<void> {
    const state = await this.api.getState(this.sid());
    this.store.setSession(state, "refreshed");
  }

  /** Step on a pair; opens the branch picker for probabilistic rules. */
  async requestStep(pair: Pair): Promise<void> {
    const { session, inflight } = this.store.get();
    if (!session || inflight) return;
    if (enabledOutcomes(session, pair) > 1) {
      this.store.update({ picker: { pair, outcomes: enabledOutcomes(session, pair) }, chooser: null });
      return;
    }
    await this.performStep(pair, undefined);
  }

  async performStep(pair: Pair, choice: number | undefined): Promise<void> {
    const label = `step ${pair[0]} → ${pair[1]}${choice !== undefined ? ` branch ${choice}` : ""}`;
    await this.guard(() => this.api.step(this.sid(), pair, choice), label);
  }

  async toggleAgent(node: number): Promise<void> {
    const session = this.store.get().session;
    if (!session) return;
    const target = !session.agents[node];
    await this.guard(() => this.api.fault(this.sid(), node, target), `fault: node ${node} agent := ${target}`);
  }

  private async guard(fn: () => Promise<any>, label: string): Promise<void> {
    if (this.store.get().inflight) return;
    this.store.update({ inflight: true });
    try {
      const state = await fn();
      this.store.update({ inflight: false });
      this.store.setSession(state, label);
    } catch (err) {
      this.store.update({ inflight: false });
      if (err instanceof ApiError && err.status === 409) {
        // conflict: show the toast and pull a fresh enabled set
        this.store.update({ toast: `conflict: ${err.message}` });
        try {
          const state = await this.api.getState(this.sid());
          this.store.update({ session: state });
        } catch {
          this.store.update({ stale: true });
        }
      } else {
        this.store.update({ stale: true, toast: String(err) });
      }
    }
  }
}

function readForm(doc: Document): SessionRequest {
  const topology = (doc.getElementById("f-topology") as HTMLInputElement).value || "chain:4";
  const protocol = (doc.getElementById("f-protocol") as HTMLSelectElement).value;
  const agents = (doc.getElementById("f-agents") as HTMLInputElement).value.trim();
  const seed = Number((doc.getElementById("f-seed") as HTMLInputElement).value || "0");
  const needsOracle = protocol === "chain-token" || protocol === "prob-token" || protocol === "local-leader-k1";
  const oracle = !needsOracle ? null : protocol === "local-leader-k1" ? { kind: "k", k: 1 } : { kind: "global" };
  const req: SessionRequest = { topology, protocol, oracle, seed, max_steps: 100000 };
  if (agents === "random") {
    req.initial = "random";
  } else {
    const n = Number(topology.split(":")[1] ?? "4");
    const holders = new Set(agents.split(",").filter((s) => s !== "").map(Number));
    req.initial = Array.from({ length: n }, (_, i) => (holders.has(i) ? 1 : 0));
  }
  return req;
}

export function boot(doc: Document = document): App {
  const app = new App(doc.getElementById("app") as HTMLElement, "");
  const form = doc.getElementById("session-form") as HTMLFormElement | null;
  form?.addEventListener("submit", (ev) => {
    ev.preventDefault();
    void app.createSession(readForm(doc)).catch((err) => {
      const status = doc.getElementById("form-status");
      if (status) status.textContent = String(err);
    });
  });
  return app;
}

declare global {
  interface Window {
    tipApp?: App;
  }
}

if (typeof window !== "undefined" && typeof document !== "undefined" && document.getElementById("app")) {
  window.tipApp = boot(document);
}
