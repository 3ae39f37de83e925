// Minimal WebSocket wrapper: JSON framing, reconnect with backoff, and a
// connected flag the view reducer consumes.

import { ClientCommand, ServerEvent } from "./protocol.js";

export class EngineSocket {
  private ws: WebSocket | null = null;
  private attempts = 0;
  private closed = false;

  constructor(
    private readonly url: string,
    private readonly onEvent: (event: ServerEvent) => void,
    private readonly onStatus: (connected: boolean) => void,
  ) {}

  connect(): void {
    this.closed = false;
    this.ws = new WebSocket(this.url);
    this.ws.onopen = () => {
      this.attempts = 0;
      this.onStatus(true);
    };
    this.ws.onmessage = (message) => {
      this.onEvent(JSON.parse(message.data as string) as ServerEvent);
    };
    this.ws.onclose = () => {
      this.onStatus(false);
      if (!this.closed) {
        const delay = Math.min(500 * 2 ** this.attempts, 8000);
        this.attempts += 1;
        setTimeout(() => this.connect(), delay);
      }
    };
  }

  send(command: ClientCommand): boolean {
    if (this.ws && this.ws.readyState === WebSocket.OPEN) {
      this.ws.send(JSON.stringify(command));
      return true;
    }
    return false;
  }

  close(): void {
    this.closed = true;
    this.ws?.close();
  }
}
