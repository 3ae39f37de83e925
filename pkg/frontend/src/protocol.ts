// Wire types for the engine's WebSocket protocol (version 1).

export const PROTOCOL_VERSION = 1;

export interface PresetFields {
  start_s: number;
  duration_s: number;
  speed: number;
  pitch_shift: number;
  cutoff_hz: number;
  resonance_q: number;
}

export const PRESET_FIELDS: (keyof PresetFields)[] = [
  "start_s", "duration_s", "speed", "pitch_shift", "cutoff_hz", "resonance_q",
];

// mirror of the engine-side ranges so forms can flag bad values inline
// before a send; the server revalidates regardless
export const PRESET_RANGES: Record<keyof PresetFields, [number, number | null]> = {
  start_s: [0, null],
  duration_s: [1e-9, null],
  speed: [1e-9, null],
  pitch_shift: [-24, 24],
  cutoff_hz: [20, 20000],
  resonance_q: [0.1, 20],
};

export interface MarkerFramePayload {
  t: number;
  kind: "marker";
  markers: { label: string; p: [number, number, number]; mass: number }[];
}

export type ClientCommand =
  | { v: 1; cmd: "create"; config: Record<string, unknown> }
  | { v: 1; cmd: "record"; frames: MarkerFramePayload[]; target: PresetFields }
  | { v: 1; cmd: "train" }
  | { v: 1; cmd: "predict"; frames: MarkerFramePayload[] }
  | { v: 1; cmd: "frame"; frame: MarkerFramePayload }
  | { v: 1; cmd: "propose" }
  | { v: 1; cmd: "guiding"; sign: 1 | -1 }
  | { v: 1; cmd: "zone" }
  | { v: 1; cmd: "save" }
  | { v: 1; cmd: "load"; id: string };

export interface StateEvent {
  v: 1;
  evt: "state";
  session: string;
  mode: "iml" | "aiml";
  phase: "idle" | "recording" | "trained" | "running";
  synthesis: string;
  n_examples: number;
  proposal_id: number | null;
  step_size: number | null;
  mapping?: string;
  final_loss?: number;
}

export interface FeaturesEvent {
  v: 1;
  evt: "features";
  names: string[];
  values: number[];
}

export interface ParamsEvent {
  v: 1;
  evt: "params";
  values: number[];
  preset?: PresetFields;
}

export interface UnitEvent {
  v: 1;
  evt: "unit";
  source_id: string;
  start: number;
  length: number;
}

export interface ProposalEvent {
  v: 1;
  evt: "proposal";
  id: number;
  points: number[][];
  presets: number[][] | null;
}

export interface ErrorEvent {
  v: 1;
  evt: "error";
  error: string;
  legal?: string[];
}

export type ServerEvent =
  | StateEvent
  | FeaturesEvent
  | ParamsEvent
  | ProposalEvent
  | UnitEvent
  | ErrorEvent;

export function presetFromValues(values: number[]): PresetFields {
  const p = {} as PresetFields;
  PRESET_FIELDS.forEach((field, i) => {
    p[field] = values[i];
  });
  return p;
}

export function validatePresetFields(p: PresetFields): Partial<Record<keyof PresetFields, string>> {
  const errors: Partial<Record<keyof PresetFields, string>> = {};
  for (const field of PRESET_FIELDS) {
    const value = p[field];
    const [lo, hi] = PRESET_RANGES[field];
    if (!Number.isFinite(value)) {
      errors[field] = "not a number";
    } else if (value < lo) {
      errors[field] = `must be >= ${lo}`;
    } else if (hi !== null && value > hi) {
      errors[field] = `must be <= ${hi}`;
    }
  }
  return errors;
}
