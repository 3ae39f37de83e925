// The view model. State changes happen in exactly one place: the pure
// reducer over the merged stream of server events and local actions.
// Everything numeric the UI shows comes from server events; the client
// computes no features, models, or agent logic.

import {
  ClientCommand,
  PresetFields,
  ServerEvent,
} from "./protocol.js";

export type UiPhase = "design" | "proposing" | "playing" | "feedback";

export interface UiSessionView {
  connected: boolean;
  sessionId: string | null;
  mode: "iml" | "aiml" | null;
  serverPhase: string | null;
  phase: UiPhase;
  proposalId: number | null;
  proposalPoints: number[][] | null;
  stepSize: number | null;
  liveFeatures: { names: string[]; values: number[] } | null;
  liveParams: number[] | null;
  livePreset: PresetFields | null;
  mappings: string[];
  lastError: string | null;
  legalActions: string[];
}

export function initialView(): UiSessionView {
  return {
    connected: false,
    sessionId: null,
    mode: null,
    serverPhase: null,
    phase: "design",
    proposalId: null,
    proposalPoints: null,
    stepSize: null,
    liveFeatures: null,
    liveParams: null,
    livePreset: null,
    mappings: [],
    lastError: null,
    legalActions: [],
  };
}

// Local actions are the user-intent half of the stream. Each maps 1:1 to
// a protocol command via commandFor().
export type UiAction =
  | { act: "designPresets"; presets: PresetFields[]; seed: number }
  | { act: "propose" }
  | { act: "guiding"; sign: 1 | -1 }
  | { act: "zone" }
  | { act: "save" }
  | { act: "load"; id: string };

export function commandFor(action: UiAction): ClientCommand {
  switch (action.act) {
    case "designPresets":
      return {
        v: 1,
        cmd: "create",
        config: {
          mode: "aiml",
          presets: action.presets,
          seed: action.seed,
          features: ["pos_xy"],
        },
      };
    case "propose":
      return { v: 1, cmd: "propose" };
    case "guiding":
      return { v: 1, cmd: "guiding", sign: action.sign };
    case "zone":
      return { v: 1, cmd: "zone" };
    case "save":
      return { v: 1, cmd: "save" };
    case "load":
      return { v: 1, cmd: "load", id: action.id };
  }
}

export type StreamItem =
  | { from: "server"; event: ServerEvent }
  | { from: "local"; action: UiAction }
  | { from: "socket"; connected: boolean };

export function reduce(view: UiSessionView, item: StreamItem): UiSessionView {
  const next = { ...view };
  if (item.from === "socket") {
    next.connected = item.connected;
    if (!item.connected) {
      next.liveParams = null;
      next.livePreset = null;
    }
    return next;
  }

  if (item.from === "local") {
    switch (item.action.act) {
      case "propose":
        next.phase = "proposing";
        break;
      case "guiding":
      case "zone":
        next.phase = "feedback";
        break;
      default:
        break;
    }
    return next;
  }

  const event = item.event;
  switch (event.evt) {
    case "state":
      next.sessionId = event.session;
      next.mode = event.mode;
      next.serverPhase = event.phase;
      next.proposalId = event.proposal_id;
      next.stepSize = event.step_size;
      next.lastError = null;
      if (event.mapping) {
        next.mappings = view.mappings.includes(event.mapping)
          ? view.mappings
          : [...view.mappings, event.mapping];
      }
      // reconcile: server state always wins over whatever we extrapolated
      if (event.phase === "idle") {
        next.phase = "design";
      } else if ((event.phase === "trained" || event.phase === "running")
                 && view.phase !== "proposing") {
        next.phase = "playing";
      }
      break;
    case "proposal":
      next.proposalId = event.id;
      next.proposalPoints = event.points;
      next.phase = "playing";
      break;
    case "features":
      next.liveFeatures = { names: event.names, values: event.values };
      break;
    case "params":
      next.liveParams = event.values;
      next.livePreset = event.preset ?? null;
      break;
    case "error":
      next.lastError = event.error;
      next.legalActions = event.legal ?? [];
      break;
  }
  return next;
}

export function replayStream(items: StreamItem[]): UiSessionView {
  return items.reduce(reduce, initialView());
}

// Rapid repeated clicks must collapse to one command.
export function debounced<A extends unknown[]>(
  fn: (...args: A) => void,
  minIntervalMs: number,
  clock: () => number = () => Date.now(),
): (...args: A) => boolean {
  let last = -Infinity;
  return (...args: A) => {
    const now = clock();
    if (now - last < minIntervalMs) {
      return false;
    }
    last = now;
    fn(...args);
    return true;
  };
}
