// DOM wiring around the pure renderer: user events become UserActions, which
// either emit exactly one protocol command or mutate presentation state.

import { renderApp } from "./render.js";
import type {
  Command,
  CommandResponse,
  Radix,
  Transport,
  UserAction,
  ViewState,
} from "./types.js";

async function readFileText(file: File): Promise<string> {
  if (typeof file.text === "function") {
    return file.text();
  }
  return new Promise((resolve, reject) => {
    const reader = new FileReader();
    reader.onload = () => resolve(String(reader.result));
    reader.onerror = () => reject(reader.error);
    reader.readAsText(file);
  });
}

export class App {
  view: ViewState = {
    snapshot: null,
    radix: "hex",
    foldedLabels: new Set(),
    foldedRegions: new Set(),
  };
  busy = false;
  error: string | null = null;
  private queue: Promise<void> = Promise.resolve();

  constructor(
    private readonly root: HTMLElement,
    private readonly transport: Transport,
  ) {}

  init(): void {
    this.render();
    this.bindEvents();
  }

  /** Resolves once every queued action has settled (used by tests). */
  whenIdle(): Promise<void> {
    return this.queue;
  }

  dispatch(action: UserAction): Promise<void> {
    this.queue = this.queue.then(() => this.perform(action));
    return this.queue;
  }

  private async perform(action: UserAction): Promise<void> {
    // fold and radix changes are pure view mutations: no command, no round trip
    if (action.kind === "set_radix") {
      this.view.radix = action.radix;
      this.render();
      return;
    }
    if (action.kind === "fold_label") {
      toggle(this.view.foldedLabels, action.label);
      this.render();
      return;
    }
    if (action.kind === "fold_region") {
      toggle(this.view.foldedRegions, action.region);
      this.render();
      return;
    }
    if (this.busy) {
      return;
    }
    let command: Command;
    if (action.kind === "load_file") {
      command = { cmd: "load", source: await readFileText(action.file) };
    } else if (action.kind === "step") {
      command = { cmd: "step", count: 1 };
    } else if (action.kind === "run") {
      command = { cmd: "run" };
    } else if (action.kind === "reset") {
      command = { cmd: "reset" };
    } else {
      const isSet = !(this.view.snapshot?.breakpoints ?? []).includes(action.address);
      command = isSet
        ? { cmd: "set_break", address: action.address }
        : { cmd: "clear_break", address: action.address };
    }
    await this.sendCommand(command);
  }

  private async sendCommand(command: Command): Promise<void> {
    this.busy = true;
    this.render();
    let response: CommandResponse;
    try {
      response = await this.transport.send(command);
    } catch (exc) {
      // transport failure: keep the last good view, surface a banner
      this.busy = false;
      this.error = exc instanceof Error ? exc.message : String(exc);
      this.render();
      return;
    }
    this.busy = false;
    if (response.ok) {
      this.view.snapshot = response.snapshot;
      this.error = null;
    } else {
      this.error = response.line !== undefined
        ? `line ${response.line}: ${response.error}`
        : response.error;
    }
    this.render();
  }

  render(): void {
    this.root.innerHTML = renderApp(this.view, { busy: this.busy, error: this.error });
  }

  private bindEvents(): void {
    this.root.addEventListener("change", (event) => {
      const target = event.target as HTMLElement;
      if (target.classList.contains("file-input")) {
        const file = (target as HTMLInputElement).files?.[0];
        if (file) {
          this.dispatch({ kind: "load_file", file });
        }
      } else if (target.classList.contains("radix-select")) {
        this.dispatch({
          kind: "set_radix",
          radix: (target as HTMLSelectElement).value as Radix,
        });
      }
    });

    this.root.addEventListener("click", (event) => {
      const target = event.target as HTMLElement;
      const fold = target.closest<HTMLElement>(".fold-toggle");
      if (fold?.dataset.foldLabel) {
        this.dispatch({ kind: "fold_label", label: fold.dataset.foldLabel });
        return;
      }
      if (fold?.dataset.foldRegion) {
        this.dispatch({ kind: "fold_region", region: fold.dataset.foldRegion });
        return;
      }
      const button = target.closest<HTMLElement>("[data-action]");
      if (button && !(button as HTMLButtonElement).disabled) {
        const action = button.dataset.action;
        if (action === "run" || action === "step" || action === "reset") {
          this.dispatch({ kind: action });
        }
      }
      this.hideContextMenu();
    });

    this.root.addEventListener("contextmenu", (event) => {
      const line = (event.target as HTMLElement).closest<HTMLElement>(".line[data-address]");
      if (!line) {
        return;
      }
      event.preventDefault();
      this.showContextMenu(line, event as MouseEvent);
    });
  }

  private contextMenuElement(): HTMLElement {
    return this.root.querySelector(".context-menu") as HTMLElement;
  }

  private showContextMenu(line: HTMLElement, event: MouseEvent): void {
    const address = Number(line.dataset.address);
    const hasBp = (this.view.snapshot?.breakpoints ?? []).includes(address);
    const menu = this.contextMenuElement();
    menu.innerHTML =
      `<div class="menu-item" data-menu="toggle-break" data-menu-address="${address}">` +
      `${hasBp ? "Remove breakpoint" : "Set breakpoint"}</div>`;
    menu.hidden = false;
    menu.style.left = `${event.clientX}px`;
    menu.style.top = `${event.clientY}px`;
    menu.onclick = (clickEvent) => {
      const item = (clickEvent.target as HTMLElement).closest<HTMLElement>("[data-menu]");
      if (item?.dataset.menu === "toggle-break") {
        this.dispatch({
          kind: "context_break_toggle",
          address: Number(item.dataset.menuAddress),
        });
      }
      this.hideContextMenu();
    };
  }

  private hideContextMenu(): void {
    const menu = this.contextMenuElement();
    if (menu) {
      menu.hidden = true;
      menu.innerHTML = "";
    }
  }
}

function toggle(set: Set<string>, value: string): void {
  if (set.has(value)) {
    set.delete(value);
  } else {
    set.add(value);
  }
}
