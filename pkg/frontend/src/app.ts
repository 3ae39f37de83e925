// DOM shell around the pure view model. Socket events and pointer events
// merge into one ordered stream; every state change goes through reduce().

import { GranularPreview } from "./audio.js";
import { PointerFeatureSource } from "./pointer.js";
import {
  PRESET_FIELDS,
  PresetFields,
  ServerEvent,
  validatePresetFields,
} from "./protocol.js";
import { EngineSocket } from "./socket.js";
import {
  StreamItem,
  UiAction,
  UiSessionView,
  commandFor,
  debounced,
  initialView,
  reduce,
} from "./view.js";

const DEFAULT_PRESETS: PresetFields[] = [
  { start_s: 0.0, duration_s: 0.6, speed: 0.7, pitch_shift: -7, cutoff_hz: 500, resonance_q: 1.2 },
  { start_s: 0.4, duration_s: 1.2, speed: 1.0, pitch_shift: 0, cutoff_hz: 2500, resonance_q: 0.9 },
  { start_s: 0.9, duration_s: 0.8, speed: 1.6, pitch_shift: 7, cutoff_hz: 8000, resonance_q: 3.0 },
  { start_s: 1.3, duration_s: 0.5, speed: 2.2, pitch_shift: 12, cutoff_hz: 15000, resonance_q: 6.0 },
];

const FEEDBACK_DEBOUNCE_MS = 300;

export class StudioApp {
  view: UiSessionView = initialView();
  private readonly socket: EngineSocket;
  private readonly pointer = new PointerFeatureSource();
  private readonly preview = new GranularPreview();
  private audioCtx: AudioContext | null = null;

  constructor(private readonly root: Document, wsUrl: string) {
    this.socket = new EngineSocket(
      wsUrl,
      (event) => this.apply({ from: "server", event }),
      (connected) => {
        this.apply({ from: "socket", connected });
        this.preview.setMuted(!connected);
      },
    );
    this.buildDom();
    this.socket.connect();
  }

  private apply(item: StreamItem): void {
    this.view = reduce(this.view, item);
    if (item.from === "server") {
      this.afterServerEvent(item.event);
    }
    this.render();
  }

  private act(action: UiAction): void {
    const sent = this.socket.send(commandFor(action));
    if (sent) {
      this.apply({ from: "local", action });
    }
  }

  private afterServerEvent(event: ServerEvent): void {
    if (event.evt === "params" && event.preset) {
      this.preview.update(event.preset);
    }
    // feedback acknowledged -> immediately ask for the next proposal so
    // the user lands back in play mode
    if (event.evt === "state" && this.view.phase === "feedback") {
      this.act({ act: "propose" });
    }
  }

  // -- DOM ----------------------------------------------------------------

  private el<T extends HTMLElement>(id: string): T {
    return this.root.getElementById(id) as T;
  }

  private buildDom(): void {
    const editors = this.el<HTMLDivElement>("preset-editors");
    DEFAULT_PRESETS.forEach((preset, slot) => {
      const card = this.root.createElement("fieldset");
      card.className = "preset-card";
      card.innerHTML = `<legend>sound ${slot + 1}</legend>`;
      for (const field of PRESET_FIELDS) {
        const row = this.root.createElement("label");
        row.innerHTML = `<span>${field}</span>`;
        const input = this.root.createElement("input");
        input.type = "number";
        input.step = "any";
        input.id = `preset-${slot}-${field}`;
        input.value = String(preset[field]);
        const err = this.root.createElement("em");
        err.id = `preset-${slot}-${field}-error`;
        row.append(input, err);
        card.append(row);
      }
      editors.append(card);
    });

    this.el<HTMLButtonElement>("btn-start").onclick = () => this.submitPresets();

    const feedback = (action: UiAction) => this.act(action);
    const guard = debounced(feedback, FEEDBACK_DEBOUNCE_MS);
    this.el<HTMLButtonElement>("btn-plus").onclick = () =>
      guard({ act: "guiding", sign: 1 });
    this.el<HTMLButtonElement>("btn-minus").onclick = () =>
      guard({ act: "guiding", sign: -1 });
    this.el<HTMLButtonElement>("btn-zone").onclick = () => guard({ act: "zone" });
    this.el<HTMLButtonElement>("btn-save").onclick = () => guard({ act: "save" });

    const pad = this.el<HTMLDivElement>("pad");
    pad.onpointermove = (pe) => {
      if (this.view.phase !== "playing" || !this.view.connected) {
        return;
      }
      const rect = pad.getBoundingClientRect();
      const frame = this.pointer.frame(
        (pe.clientX - rect.left) / rect.width,
        1 - (pe.clientY - rect.top) / rect.height,
      );
      if (frame) {
        this.socket.send({ v: 1, cmd: "frame", frame });
      }
    };
    pad.onpointerdown = () => this.ensureAudio();
  }

  private ensureAudio(): void {
    if (!this.audioCtx) {
      this.audioCtx = new AudioContext();
      this.preview.start(this.audioCtx);
    }
    void this.audioCtx.resume();
  }

  private submitPresets(): void {
    const presets: PresetFields[] = [];
    let blocked = false;
    for (let slot = 0; slot < 4; slot++) {
      const preset = {} as PresetFields;
      for (const field of PRESET_FIELDS) {
        preset[field] = Number(
          this.el<HTMLInputElement>(`preset-${slot}-${field}`).value,
        );
      }
      const errors = validatePresetFields(preset);
      for (const field of PRESET_FIELDS) {
        const label = this.el<HTMLElement>(`preset-${slot}-${field}-error`);
        label.textContent = errors[field] ?? "";
        blocked = blocked || Boolean(errors[field]);
      }
      presets.push(preset);
    }
    if (blocked) {
      return;
    }
    this.act({ act: "designPresets", presets, seed: Date.now() % 100000 });
    this.act({ act: "propose" });
  }

  private render(): void {
    const v = this.view;
    this.el<HTMLElement>("phase").textContent = v.phase;
    this.el<HTMLElement>("banner").hidden = v.connected;
    this.el<HTMLElement>("session-id").textContent = v.sessionId ?? "-";
    this.el<HTMLElement>("proposal-id").textContent =
      v.proposalId === null ? "-" : String(v.proposalId);
    this.el<HTMLElement>("error").textContent = v.lastError ?? "";

    const inPlay = v.phase === "playing" && v.connected;
    for (const id of ["btn-plus", "btn-minus", "btn-zone", "btn-save"]) {
      this.el<HTMLButtonElement>(id).disabled = !inPlay;
    }
    this.el<HTMLButtonElement>("btn-start").disabled =
      !v.connected || v.phase !== "design";

    const meters = this.el<HTMLDivElement>("meters");
    if (v.livePreset) {
      meters.innerHTML = PRESET_FIELDS.map((field) => {
        const value = v.livePreset![field];
        return `<div class="meter"><span>${field}</span><b>${value.toFixed(3)}</b></div>`;
      }).join("");
    }

    const markers = this.el<HTMLDivElement>("pad-markers");
    if (v.proposalPoints) {
      markers.innerHTML = v.proposalPoints
        .map(([x, y], i) =>
          `<i class="mark" style="left:${x * 100}%;bottom:${y * 100}%">${i + 1}</i>`)
        .join("");
    }
    const dot = this.el<HTMLElement>("pad-dot");
    if (v.liveFeatures && v.liveFeatures.values.length >= 2) {
      dot.style.left = `${v.liveFeatures.values[0] * 100}%`;
      dot.style.bottom = `${v.liveFeatures.values[1] * 100}%`;
      dot.hidden = false;
    }

    this.el<HTMLElement>("mappings").innerHTML = v.mappings
      .map((id) => `<li><a href="/mappings/${id}" target="_blank">${id}</a></li>`)
      .join("");
  }
}
