/** Session payloads recorded from the live service (POST /sessions). */
import type { SessionState } from "../src/api.js";

export const CHAIN_TOKEN_AGENT_AT_D = {
  v: 1,
  id: "b5dbee9e6f86c48d",
  step_index: 0,
  agents: [0, 0, 0, 1],
  inputs: [1, 1, 1, 1],
  enabled: [[2, 3]],
  enabled_outcomes: [1],
  terminal: false,
  agent_count: 1,
  legitimacy: { "unique-token": true },
  node_count: 4,
  interactions: [[0, 1], [1, 0], [1, 2], [2, 1], [2, 3], [3, 2]],
  protocol: "chain-token",
} as unknown as SessionState;

export const PROB_TOKEN_ONE_AGENT = {
  v: 1,
  id: "ab00ccd4cf8f3464",
  step_index: 0,
  agents: [1, 0, 0, 0],
  inputs: [1, 1, 1, 1],
  enabled: [[0, 1], [1, 0]],
  enabled_outcomes: [2, 2],
  terminal: false,
  agent_count: 1,
  legitimacy: { "unique-token": true },
  node_count: 4,
  interactions: [[0, 1], [1, 0], [1, 2], [2, 1], [2, 3], [3, 2]],
  protocol: "prob-token",
} as unknown as SessionState;

export const TWO_NODE_TERMINAL = {
  v: 1,
  id: "587de4b549fcc6ff",
  step_index: 0,
  agents: [1, 0],
  inputs: null,
  enabled: [],
  enabled_outcomes: [],
  terminal: true,
  agent_count: 1,
  legitimacy: { "unique-token": true },
  node_count: 2,
  interactions: [[0, 1], [1, 0]],
  protocol: "two-node-token",
} as unknown as SessionState;

export const TWO_AGENTS_ILLEGITIMATE = {
  ...CHAIN_TOKEN_AGENT_AT_D,
  id: "fixture-two-agents",
  agents: [0, 1, 0, 1],
  enabled: [[0, 1], [2, 3]],
  enabled_outcomes: [1, 1],
  agent_count: 2,
  legitimacy: { "unique-token": false },
} as unknown as SessionState;
