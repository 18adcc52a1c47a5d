/** DOM rendering: a pure projection of the view state.
 *
 * Nodes are laid out on a circle; agent holders are filled, clean nodes
 * hollow (the figure convention), oracle inputs shown as T/F badges.
 * Enabled edges are clickable; an edge with both orientations enabled
 * opens a direction chooser. Keyboard users get the enabled-pair list. */

import type { Pair, SessionState } from "./api.js";
import { ViewState, enabledOutcomes, isEnabled, pairKey } from "./state.js";

export interface Handlers {
  onPairClick(pair: Pair): void;
  onEdgeClick(orientations: Pair[]): void;
  onNodeClick(node: number): void;
  onBranchPick(pair: Pair, choice: number | undefined): void;
  onChooserPick(pair: Pair): void;
  onOverride(node: number, value: boolean): void;
  onClearOverrides(): void;
  onRefresh(): void;
}

const SVG_NS = "http://www.w3.org/2000/svg";
const SIZE = 420;
const RADIUS = 160;

function positions(n: number): [number, number][] {
  const out: [number, number][] = [];
  for (let i = 0; i < n; i++) {
    const angle = (2 * Math.PI * i) / n - Math.PI / 2;
    out.push([SIZE / 2 + RADIUS * Math.cos(angle), SIZE / 2 + RADIUS * Math.sin(angle)]);
  }
  return out;
}

function el(tag: string, attrs: Record<string, string> = {}, text?: string): HTMLElement {
  const node = document.createElement(tag);
  for (const [k, v] of Object.entries(attrs)) node.setAttribute(k, v);
  if (text !== undefined) node.textContent = text;
  return node;
}

function svgEl(tag: string, attrs: Record<string, string> = {}): SVGElement {
  const node = document.createElementNS(SVG_NS, tag);
  for (const [k, v] of Object.entries(attrs)) node.setAttribute(k, v);
  return node;
}

function undirectedEdges(session: SessionState): Map<string, Pair[]> {
  const edges = new Map<string, Pair[]>();
  for (const [u, v] of session.interactions) {
    const key = u < v ? `${u}:${v}` : `${v}:${u}`;
    const list = edges.get(key) ?? [];
    list.push([u, v]);
    edges.set(key, list);
  }
  return edges;
}

function renderGraph(session: SessionState, handlers: Handlers, busy: boolean): SVGElement {
  const svg = svgEl("svg", {
    viewBox: `0 0 ${SIZE} ${SIZE}`,
    width: String(SIZE),
    height: String(SIZE),
    role: "img",
    "data-testid": "graph",
  });
  const pos = positions(session.node_count);

  for (const [key, orientations] of undirectedEdges(session)) {
    const [a, b] = key.split(":").map(Number);
    const enabledOnes = orientations.filter((p) => isEnabled(session, p));
    const line = svgEl("line", {
      x1: String(pos[a][0]),
      y1: String(pos[a][1]),
      x2: String(pos[b][0]),
      y2: String(pos[b][1]),
      class: enabledOnes.length ? "edge enabled" : "edge inert",
      "data-testid": `edge-${key}`,
    });
    if (enabledOnes.length && !busy) {
      line.addEventListener("click", () => handlers.onEdgeClick(enabledOnes));
    }
    svg.appendChild(line);
  }

  for (let i = 0; i < session.node_count; i++) {
    const g = svgEl("g", { class: "node", "data-testid": `node-${i}` });
    const circle = svgEl("circle", {
      cx: String(pos[i][0]),
      cy: String(pos[i][1]),
      r: "18",
      class: session.agents[i] ? "agent" : "clean",
      "data-agent": String(session.agents[i]),
    });
    circle.addEventListener("click", () => handlers.onNodeClick(i));
    g.appendChild(circle);
    const label = svgEl("text", {
      x: String(pos[i][0]),
      y: String(pos[i][1] + 5),
      class: "node-label",
      "text-anchor": "middle",
    });
    label.textContent = String(i);
    g.appendChild(label);
    if (session.inputs) {
      const badge = svgEl("text", {
        x: String(pos[i][0]),
        y: String(pos[i][1] - 24),
        class: "oracle-badge",
        "text-anchor": "middle",
        "data-testid": `oracle-${i}`,
      });
      badge.textContent = session.inputs[i] ? "T" : "F";
      g.appendChild(badge);
    }
    svg.appendChild(g);
  }
  return svg;
}

function renderBanners(state: ViewState, root: HTMLElement, handlers: Handlers): void {
  const session = state.session!;
  if (state.stale) {
    const banner = el("div", { class: "banner stale", "data-testid": "stale-banner" },
      "state may be stale - ");
    const btn = el("button", { "data-testid": "refresh" }, "refresh");
    btn.addEventListener("click", handlers.onRefresh);
    banner.appendChild(btn);
    root.appendChild(banner);
  }
  const legit = Object.entries(session.legitimacy);
  const allGood = legit.every(([, v]) => v);
  const banner = el(
    "div",
    { class: allGood ? "banner legitimate" : "banner illegitimate", "data-testid": "legitimacy-banner" },
    legit.map(([k, v]) => `${k}: ${v ? "yes" : "no"}`).join("  "),
  );
  root.appendChild(banner);
  if (session.terminal) {
    root.appendChild(el("div", { class: "banner terminal", "data-testid": "terminal-banner" },
      "terminal: no interaction is enabled"));
  }
  if (state.toast) {
    root.appendChild(el("div", { class: "toast", "data-testid": "toast" }, state.toast));
  }
}

function renderPairList(state: ViewState, root: HTMLElement, handlers: Handlers): void {
  const session = state.session!;
  const list = el("div", { class: "pair-list", "data-testid": "pair-list" });
  list.appendChild(el("h3", {}, "enabled interactions"));
  for (const pair of session.enabled) {
    const btn = el(
      "button",
      { class: "pair-button", "data-testid": `pair-${pairKey(pair)}` },
      `${pair[0]} → ${pair[1]}${enabledOutcomes(session, pair) > 1 ? " (coin)" : ""}`,
    );
    btn.addEventListener("click", () => handlers.onPairClick(pair));
    if (state.inflight) btn.setAttribute("disabled", "disabled");
    list.appendChild(btn);
  }
  root.appendChild(list);
}

function renderPicker(state: ViewState, root: HTMLElement, handlers: Handlers): void {
  if (state.picker) {
    const { pair, outcomes } = state.picker;
    const box = el("div", { class: "picker", "data-testid": "branch-picker" });
    box.appendChild(el("h3", {}, `outcome for ${pair[0]} → ${pair[1]}`));
    for (let i = 0; i < outcomes; i++) {
      const btn = el("button", { "data-testid": `branch-${i}` }, `branch ${i}`);
      btn.addEventListener("click", () => handlers.onBranchPick(pair, i));
      box.appendChild(btn);
    }
    const rnd = el("button", { "data-testid": "branch-random" }, "random");
    rnd.addEventListener("click", () => handlers.onBranchPick(pair, undefined));
    box.appendChild(rnd);
    root.appendChild(box);
  }
  if (state.chooser) {
    const box = el("div", { class: "picker", "data-testid": "direction-chooser" });
    box.appendChild(el("h3", {}, "direction"));
    for (const pair of state.chooser) {
      const btn = el("button", { "data-testid": `direction-${pairKey(pair)}` }, `${pair[0]} → ${pair[1]}`);
      btn.addEventListener("click", () => handlers.onChooserPick(pair));
      box.appendChild(btn);
    }
    root.appendChild(box);
  }
}

function renderOverrides(state: ViewState, root: HTMLElement, handlers: Handlers): void {
  const session = state.session!;
  if (!session.inputs) return;
  const box = el("div", { class: "overrides" });
  box.appendChild(el("h3", {}, "oracle override"));
  for (let i = 0; i < session.node_count; i++) {
    const row = el("span", { class: "override-row" }, `node ${i}: `);
    const t = el("button", { "data-testid": `override-${i}-true` }, "T");
    t.addEventListener("click", () => handlers.onOverride(i, true));
    const f = el("button", { "data-testid": `override-${i}-false` }, "F");
    f.addEventListener("click", () => handlers.onOverride(i, false));
    row.appendChild(t);
    row.appendChild(f);
    box.appendChild(row);
  }
  const clear = el("button", { "data-testid": "override-clear" }, "clear overrides");
  clear.addEventListener("click", handlers.onClearOverrides);
  box.appendChild(clear);
  root.appendChild(box);
}

function renderLog(state: ViewState, root: HTMLElement): void {
  const box = el("div", { class: "log", "data-testid": "step-log" });
  box.appendChild(el("h3", {}, "log"));
  const list = el("ol", {});
  for (const entry of state.log) {
    list.appendChild(el("li", {}, `[${entry.step}] ${entry.text}`));
  }
  box.appendChild(list);
  root.appendChild(box);
}

export function render(root: HTMLElement, state: ViewState, handlers: Handlers): void {
  root.textContent = "";
  if (!state.session) {
    root.appendChild(el("div", { class: "empty", "data-testid": "no-session" }, "no session"));
    return;
  }
  const session = state.session;
  const head = el("div", { class: "head" });
  head.appendChild(el("span", { "data-testid": "protocol" }, session.protocol));
  head.appendChild(el("span", { "data-testid": "step-index" }, `step ${session.step_index}`));
  head.appendChild(el("span", { "data-testid": "agent-count" }, `${session.agent_count} agent(s)`));
  root.appendChild(head);
  renderBanners(state, root, handlers);
  root.appendChild(renderGraph(session, handlers, state.inflight));
  renderPairList(state, root, handlers);
  renderPicker(state, root, handlers);
  renderOverrides(state, root, handlers);
  renderLog(state, root);
}
