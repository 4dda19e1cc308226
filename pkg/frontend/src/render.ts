// Pure HTML rendering: every function maps ViewState fragments to markup and
// computes nothing about the machine itself.

import { ABI_NAMES, escapeHtml, formatAddress, formatValue } from "./format.js";
import type { Radix, Snapshot, ViewState } from "./types.js";

export interface UiFlags {
  busy: boolean;
  error: string | null;
}

export function labelName(text: string): string {
  return text.replace(/:\s*$/, "");
}

export function renderRegisters(snapshot: Snapshot, radix: Radix): string {
  const changed = new Set(snapshot.changed_registers);
  const rows = snapshot.registers
    .map((value, i) => {
      const cls = changed.has(i) ? ' class="changed"' : "";
      return `<tr${cls} data-reg="${i}"><td class="reg-name">x${i} (${ABI_NAMES[i]})</td>` +
        `<td class="reg-value">${formatValue(value, radix)}</td></tr>`;
    })
    .join("");
  return `<table class="registers"><tbody>${rows}</tbody></table>`;
}

export function renderBreakdown(snapshot: Snapshot): string {
  const segments = snapshot.current_breakdown;
  if (!segments || segments.length === 0) {
    return `<div class="breakdown-empty">no instruction at pc</div>`;
  }
  const range = segments
    .map((s) => `<th class="bit-range">${s.hi === s.lo ? s.hi : `${s.hi}:${s.lo}`}</th>`)
    .join("");
  const names = segments.map((s) => `<td class="bit-name">${escapeHtml(s.name)}</td>`).join("");
  const bits = segments.map((s) => `<td class="bit-value">${s.bits}</td>`).join("");
  return `<table class="breakdown"><thead><tr class="bits-range">${range}</tr></thead>` +
    `<tbody><tr class="bits-name">${names}</tr><tr class="bits-value">${bits}</tr></tbody></table>`;
}

export function renderListing(snapshot: Snapshot, foldedLabels: Set<string>): string {
  const rows: string[] = [];
  let foldedUnder: string | null = null;
  for (const line of snapshot.listing) {
    if (line.is_label) {
      const name = labelName(line.text);
      foldedUnder = foldedLabels.has(name) ? name : null;
    }
    const classes = ["line"];
    if (line.is_kernel) classes.push("kernel");
    if (line.is_current) classes.push("current");
    if (line.is_label) classes.push("label");
    if (!line.is_label && foldedUnder !== null) classes.push("folded-away");
    const executable = line.kind === "instruction" || line.kind === "pseudo";
    const addrAttr = executable && line.address !== null ? ` data-address="${line.address}"` : "";

    let fold = `<span class="gutter"></span>`;
    if (line.is_label) {
      const name = labelName(line.text);
      const symbol = foldedLabels.has(name) ? "+" : "−";
      fold = `<span class="gutter fold-toggle" data-fold-label="${escapeHtml(name)}">${symbol}</span>`;
    }
    const bp = line.has_breakpoint ? `<span class="bp-dot">●</span>` : `<span class="bp-dot empty"></span>`;
    const addr = executable && line.address !== null
      ? `<span class="line-addr">${line.address}</span>`
      : `<span class="line-addr"></span>`;
    rows.push(
      `<div class="${classes.join(" ")}" data-line="${line.line}"${addrAttr}>` +
      `${fold}${bp}${addr}<span class="line-text">${escapeHtml(line.text)}</span></div>`);
  }
  return `<div class="listing">${rows.join("")}</div>`;
}

export function renderRegions(snapshot: Snapshot, foldedRegions: Set<string>): string {
  const blocks = snapshot.memory_regions.map((region) => {
    const folded = foldedRegions.has(region.name);
    const symbol = folded ? "+" : "−";
    const header =
      `<div class="region-header fold-toggle" data-fold-region="${region.name}">` +
      `<span class="fold-symbol">${symbol}</span> ${region.name} ` +
      `<span class="region-range">${formatAddress(region.start)}–${formatAddress(region.end)}</span></div>`;
    const words = folded ? "" : region.words
      .map((w) => {
        const comment = w.comment ? `<span class="mem-comment"># ${escapeHtml(w.comment)}</span>` : "";
        return `<div class="mem-row"><span class="mem-addr">${formatAddress(w.address)}</span>` +
          `<span class="mem-value">${formatAddress(w.value)}</span>${comment}</div>`;
      })
      .join("");
    return `<div class="region" data-region="${region.name}">${header}<div class="region-words">${words}</div></div>`;
  });
  return `<div class="regions">${blocks.join("")}</div>`;
}

function renderStatus(snapshot: Snapshot): string {
  return `<div class="status">halt=<b>${snapshot.halt}</b> pc=${formatAddress(snapshot.pc)} ` +
    `steps=${snapshot.step_count}</div>`;
}

export function renderApp(view: ViewState, ui: UiFlags): string {
  const disabled = ui.busy ? " disabled" : "";
  const needsProgram = view.snapshot === null ? " disabled" : "";
  const radixOption = (r: Radix) =>
    `<option value="${r}"${view.radix === r ? " selected" : ""}>${r}</option>`;
  const banner = ui.error
    ? `<div class="error-banner">${escapeHtml(ui.error)}</div>`
    : "";
  const middle = view.snapshot
    ? renderStatus(view.snapshot) + renderListing(view.snapshot, view.foldedLabels)
    : `<div class="placeholder">Load an assembly file to begin.</div>`;
  const left = view.snapshot
    ? renderRegisters(view.snapshot, view.radix) +
      `<h2>Instruction bits</h2>` + renderBreakdown(view.snapshot)
    : `<div class="placeholder">no session</div>`;
  const right = view.snapshot
    ? renderRegions(view.snapshot, view.foldedRegions)
    : `<div class="placeholder">no session</div>`;
  return `
<div class="columns">
  <section class="col col-left">
    <h2>Registers <select class="radix-select" data-action="radix"${needsProgram}>
      ${radixOption("dec")}${radixOption("hex")}${radixOption("bin")}
    </select></h2>
    ${left}
  </section>
  <section class="col col-middle">
    <div class="toolbar">
      <label class="btn load-btn">Load<input type="file" class="file-input" accept=".s,.asm,.txt"${disabled}></label>
      <button class="btn" data-action="run"${disabled}${needsProgram}>Run</button>
      <button class="btn" data-action="step"${disabled}${needsProgram}>Step</button>
      <button class="btn" data-action="reset"${disabled}${needsProgram}>Reset</button>
    </div>
    ${banner}
    ${middle}
  </section>
  <section class="col col-right">
    <h2>Memory</h2>
    ${right}
  </section>
</div>
<div class="context-menu" hidden></div>`;
}
