import type { Command, CommandResponse, Transport } from "./types.js";

function randomSessionId(): string {
  return "s" + Math.random().toString(36).slice(2, 10);
}

// POST /session/{id}/command on the host that served the page.
export class HttpTransport implements Transport {
  constructor(
    private readonly base: string = "",
    private readonly sessionId: string = randomSessionId(),
  ) {}

  async send(command: Command): Promise<CommandResponse> {
    const response = await fetch(`${this.base}/session/${this.sessionId}/command`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(command),
    });
    if (!response.ok && response.status !== 200) {
      const text = await response.text();
      try {
        return JSON.parse(text) as CommandResponse;
      } catch {
        throw new Error(`transport error ${response.status}: ${text.slice(0, 200)}`);
      }
    }
    return (await response.json()) as CommandResponse;
  }
}
