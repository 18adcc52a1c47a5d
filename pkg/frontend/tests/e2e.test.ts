/** End-to-end against the real session service: create a session on a
 * 4-chain, step three chosen pairs through the UI, inject one fault, and
 * check the displayed configuration equals the server trace at every step. */
import { ChildProcess, spawn } from "node:child_process";
import { afterAll, beforeAll, describe, expect, it } from "vitest";

import { App } from "../src/main.js";

const PORT = 8300 + (process.pid % 500);
const BASE = `http://127.0.0.1:${PORT}`;

let server: ChildProcess;

async function waitForServer(): Promise<void> {
  const deadline = Date.now() + 90000;
  while (Date.now() < deadline) {
    try {
      const res = await fetch(`${BASE}/sessions/nope`);
      if (res.status === 404) return;
    } catch {
      await new Promise((r) => setTimeout(r, 250));
    }
  }
  throw new Error("session service did not come up");
}

beforeAll(async () => {
  server = spawn("python3", ["-m", "tipsim", "serve", "--port", String(PORT), "--host", "127.0.0.1"], {
    cwd: "..",
    stdio: "ignore",
  });
  await waitForServer();
});

afterAll(() => {
  server?.kill("SIGKILL");
});

function displayedAgents(): number[] {
  const nodes = Array.from(document.querySelectorAll("[data-testid^='node-'] circle"));
  return nodes.map((c) => Number(c.getAttribute("data-agent")));
}

function clickPair(pair: [number, number]): void {
  const btn = document.querySelector(`[data-testid="pair-${pair[0]}-${pair[1]}"]`) as HTMLButtonElement;
  expect(btn, `pair ${pair} should be listed as enabled`).not.toBeNull();
  btn.click();
}

async function settle(app: App): Promise<void> {
  const deadline = Date.now() + 10000;
  while (app.store.get().inflight && Date.now() < deadline) {
    await new Promise((r) => setTimeout(r, 10));
  }
  expect(app.store.get().inflight).toBe(false);
}

describe("adversarial session end to end", () => {
  it("displays exactly what the service recorded, step by step", async () => {
    document.body.innerHTML = '<div id="app"></div>';
    const app = new App(document.getElementById("app") as HTMLElement, BASE);

    await app.createSession({
      topology: "chain:4",
      protocol: "chain-token",
      oracle: { kind: "global" },
      initial: [0, 1, 0, 1],
      seed: 99,
      max_steps: 100000,
    });
    const displayed: number[][] = [displayedAgents()];
    expect(displayed[0]).toEqual([0, 1, 0, 1]);

    // three human-chosen pairs, clicked through the enabled-pair list
    for (const pair of [[0, 1], [1, 0], [2, 3]] as [number, number][]) {
      clickPair(pair);
      await settle(app);
      displayed.push(displayedAgents());
    }
    expect(app.store.get().session?.step_index).toBe(3);

    // one fault: clicking node 0 toggles its agent slot via the fault endpoint
    const node0 = document.querySelector('[data-testid="node-0"] circle') as SVGCircleElement;
    node0.dispatchEvent(new MouseEvent("click", { bubbles: true }));
    await settle(app);
    displayed.push(displayedAgents());

    const sid = app.store.get().session!.id;
    const traceText = await (await fetch(`${BASE}/sessions/${sid}/trace`)).text();
    const entries = traceText.trim().split("\n").map((line) => JSON.parse(line));
    expect(entries[0].kind).toBe("header");
    const recorded: number[][] = [entries[0].initial_agents];
    for (const entry of entries.slice(1)) {
      if (entry.kind === "step" || entry.kind === "fault") recorded.push(entry.agents);
    }
    expect(displayed).toEqual(recorded);

    // the fault flipped node 0 on: three agents now, still illegitimate
    expect(displayed[displayed.length - 1].reduce((a, b) => a + b, 0)).toBe(3);
    expect(app.store.get().session?.legitimacy["unique-token"]).toBe(false);
  });

  it("rejects a disabled pair with a conflict toast and recovers", async () => {
    document.body.innerHTML = '<div id="app"></div>';
    const app = new App(document.getElementById("app") as HTMLElement, BASE);
    await app.createSession({
      topology: "chain:4",
      protocol: "chain-token",
      oracle: { kind: "global" },
      initial: [0, 0, 0, 1],
      seed: 7,
    });
    // (0,1) is not enabled: the responder holds no agent
    await app.performStep([0, 1], undefined);
    expect(document.querySelector('[data-testid="toast"]')?.textContent).toContain("conflict");
    expect(displayedAgents()).toEqual([0, 0, 0, 1]);
  });
});
