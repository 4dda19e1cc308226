// Scripted interaction loop against the real backend over the stdio protocol:
// load a sample, step twice, set a breakpoint via the context menu, run.

import { dirname, join } from "node:path";
import { fileURLToPath } from "node:url";
import { afterEach, beforeEach, describe, expect, it } from "vitest";
import { App } from "../src/app.js";
import type { Command, CommandResponse, Snapshot, Transport } from "../src/types.js";
// @ts-expect-error plain-JS helper shared with the fixture generator
import { ProtoClient } from "../scripts/proto-client.mjs";

const REPO_ROOT = join(dirname(fileURLToPath(import.meta.url)), "..", "..");

const SAMPLE = `main:   li   t0, 3
        li   t1, 4
        add  t2, t0, t1
        sub  s0, t1, t0
`;

class BackendTransport implements Transport {
  client = new ProtoClient("python3", ["-m", "rv32emu.cli", "proto"], { cwd: REPO_ROOT });
  last: CommandResponse | null = null;

  async send(command: Command): Promise<CommandResponse> {
    this.last = (await this.client.send(command)) as CommandResponse;
    return this.last;
  }

  close() {
    this.client.close();
  }
}

function loadFixtureFile(root: HTMLElement, app: App, text: string): Promise<void> {
  const input = root.querySelector<HTMLInputElement>(".file-input")!;
  const file = new File([text], "sample.s", { type: "text/plain" });
  Object.defineProperty(input, "files", { value: [file] });
  input.dispatchEvent(new Event("change", { bubbles: true }));
  return app.whenIdle();
}

function rightClick(el: Element): void {
  el.dispatchEvent(new MouseEvent("contextmenu", {
    bubbles: true,
    cancelable: true,
    clientX: 20,
    clientY: 20,
  }));
}

describe("interaction loop", () => {
  let root: HTMLElement;
  let app: App;
  let transport: BackendTransport;

  beforeEach(() => {
    root = document.createElement("div");
    document.body.appendChild(root);
    transport = new BackendTransport();
    app = new App(root, transport);
    app.init();
  });

  afterEach(() => {
    transport.close();
    root.remove();
  });

  it("load, step x2, breakpoint via context menu, run", async () => {
    await loadFixtureFile(root, app, SAMPLE);
    expect(app.view.snapshot).not.toBeNull();
    expect(root.querySelectorAll(".line").length).toBeGreaterThan(4);

    root.querySelector<HTMLElement>('[data-action="step"]')!.click();
    await app.whenIdle();
    root.querySelector<HTMLElement>('[data-action="step"]')!.click();
    await app.whenIdle();
    expect(app.view.snapshot!.step_count).toBe(2);

    // right-click the `sub` line and take the context-menu breakpoint entry
    const subLine = [...root.querySelectorAll<HTMLElement>(".line[data-address]")]
      .find((el) => el.textContent!.includes("sub"))!;
    const address = Number(subLine.dataset.address);
    rightClick(subLine);
    const menuItem = root.querySelector<HTMLElement>('.context-menu [data-menu="toggle-break"]')!;
    expect(menuItem.textContent).toContain("Set breakpoint");
    menuItem.click();
    await app.whenIdle();
    expect(app.view.snapshot!.breakpoints).toContain(address);
    expect(root.querySelectorAll(".bp-dot:not(.empty)").length).toBe(1);

    root.querySelector<HTMLElement>('[data-action="run"]')!.click();
    await app.whenIdle();

    const snapshot = app.view.snapshot as Snapshot;
    expect(snapshot.halt).toBe("breakpoint");
    expect(snapshot.pc).toBe(address);

    // the breakpointed line carries the current highlight
    const current = root.querySelectorAll<HTMLElement>(".line.current");
    expect(current.length).toBe(1);
    expect(Number(current[0].dataset.address)).toBe(address);
    expect(current[0].textContent).toContain("sub");

    // changed-register markers match the last snapshot exactly
    const marked = [...root.querySelectorAll(".registers tr.changed")]
      .map((el) => Number(el.getAttribute("data-reg")));
    expect(marked).toEqual(snapshot.changed_registers);
    expect(marked.length).toBeGreaterThan(0);
  });

  it("breakpoint toggles off through the same menu", async () => {
    await loadFixtureFile(root, app, SAMPLE);
    const line = root.querySelector<HTMLElement>(".line[data-address]")!;
    rightClick(line);
    root.querySelector<HTMLElement>('[data-menu="toggle-break"]')!.click();
    await app.whenIdle();
    expect(app.view.snapshot!.breakpoints.length).toBe(1);

    rightClick(root.querySelector<HTMLElement>(".line[data-address]")!);
    const item = root.querySelector<HTMLElement>('[data-menu="toggle-break"]')!;
    expect(item.textContent).toContain("Remove breakpoint");
    item.click();
    await app.whenIdle();
    expect(app.view.snapshot!.breakpoints.length).toBe(0);
  });

  it("load errors surface as a banner and keep the view", async () => {
    await loadFixtureFile(root, app, SAMPLE);
    const before = app.view.snapshot;
    await loadFixtureFile(root, app, "addi x1\n");
    expect(root.querySelector(".error-banner")!.textContent).toContain("line 3");
    expect(app.view.snapshot).toBe(before);
  });

  it("fold and radix emit no commands", async () => {
    await loadFixtureFile(root, app, SAMPLE);
    const lastBefore = transport.last;
    await app.dispatch({ kind: "fold_label", label: "main" });
    await app.dispatch({ kind: "set_radix", radix: "bin" });
    await app.dispatch({ kind: "fold_region", region: "text" });
    expect(transport.last).toBe(lastBefore);
    expect(root.querySelectorAll(".line.folded-away").length).toBeGreaterThan(0);
    // fold state never changes which command a later action emits
    root.querySelector<HTMLElement>('[data-action="step"]')!.click();
    await app.whenIdle();
    expect(app.view.snapshot!.step_count).toBe(1);
  });
});
