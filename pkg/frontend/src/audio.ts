// Local granular preview: the params stream drives a small grain player
// so the mapping is audible without any audio going over the wire.

import { PresetFields } from "./protocol.js";

const GRAIN_S = 0.09;
const HOP_S = GRAIN_S / 4;

/** Bright, broadband little source so filter and pitch moves are audible. */
export function makePreviewBuffer(ctx: BaseAudioContext, seconds = 2): AudioBuffer {
  const sr = ctx.sampleRate;
  const buffer = ctx.createBuffer(1, Math.floor(seconds * sr), sr);
  const data = buffer.getChannelData(0);
  let phase = 0;
  for (let i = 0; i < data.length; i++) {
    const t = i / sr;
    const f0 = 110 * Math.pow(2, Math.sin(2 * Math.PI * 0.25 * t));
    phase += f0 / sr;
    const saw = 2 * (phase - Math.floor(phase + 0.5));
    data[i] = 0.5 * saw + 0.1 * Math.sin(2 * Math.PI * 7 * t);
  }
  return buffer;
}

export class GranularPreview {
  private ctx: AudioContext | null = null;
  private buffer: AudioBuffer | null = null;
  private filter: BiquadFilterNode | null = null;
  private master: GainNode | null = null;
  private timer: ReturnType<typeof setInterval> | null = null;
  private readHead = 0;
  private preset: PresetFields | null = null;
  private muted = false;

  start(ctx: AudioContext, buffer?: AudioBuffer): void {
    this.stop();
    this.ctx = ctx;
    this.buffer = buffer ?? makePreviewBuffer(ctx);
    this.filter = ctx.createBiquadFilter();
    this.filter.type = "lowpass";
    this.master = ctx.createGain();
    this.master.gain.value = 0.8;
    this.filter.connect(this.master);
    this.master.connect(ctx.destination);
    this.timer = setInterval(() => this.tick(), HOP_S * 1000);
  }

  update(preset: PresetFields): void {
    this.preset = preset;
    if (this.filter && this.ctx) {
      const t = this.ctx.currentTime;
      this.filter.frequency.setTargetAtTime(preset.cutoff_hz, t, 0.02);
      this.filter.Q.setTargetAtTime(preset.resonance_q, t, 0.02);
    }
  }

  setMuted(muted: boolean): void {
    this.muted = muted;
    if (this.master && this.ctx) {
      this.master.gain.setTargetAtTime(muted ? 0 : 0.8, this.ctx.currentTime, 0.05);
    }
  }

  private tick(): void {
    if (!this.ctx || !this.buffer || !this.filter || !this.preset || this.muted) {
      return;
    }
    const p = this.preset;
    const srcLen = this.buffer.duration;
    const selStart = Math.min(p.start_s, Math.max(srcLen - 0.01, 0));
    const selLen = Math.min(p.duration_s, srcLen - selStart);
    if (selLen <= 0) {
      return;
    }
    this.readHead = (this.readHead + HOP_S * p.speed) % selLen;
    const grain = this.ctx.createBufferSource();
    grain.buffer = this.buffer;
    grain.playbackRate.value = Math.pow(2, p.pitch_shift / 12);
    const env = this.ctx.createGain();
    const t0 = this.ctx.currentTime;
    env.gain.setValueAtTime(0, t0);
    env.gain.linearRampToValueAtTime(0.9, t0 + GRAIN_S / 2);
    env.gain.linearRampToValueAtTime(0, t0 + GRAIN_S);
    grain.connect(env);
    env.connect(this.filter);
    grain.start(t0, selStart + this.readHead, GRAIN_S * grain.playbackRate.value);
    grain.stop(t0 + GRAIN_S + 0.01);
    grain.onended = () => {
      grain.disconnect();
      env.disconnect();
    };
  }

  stop(): void {
    if (this.timer !== null) {
      clearInterval(this.timer);
      this.timer = null;
    }
    if (this.master) {
      this.master.disconnect();
      this.master = null;
    }
    this.filter = null;
    this.ctx = null;
  }
}
