// Wire-format types for the snapshot protocol (field names match the JSON).

export interface ListingLine {
  address: number | null;
  text: string;
  kind: string;
  is_kernel: boolean;
  is_current: boolean;
  has_breakpoint: boolean;
  line: number;
  is_label: boolean;
}

export interface BreakdownSegment {
  hi: number;
  lo: number;
  name: string;
  bits: string;
}

export interface RegionWord {
  address: number;
  value: number;
  comment?: string;
}

export interface MemoryRegion {
  name: string;
  start: number;
  end: number;
  words: RegionWord[];
}

export interface Snapshot {
  pc: number;
  registers: number[];
  changed_registers: number[];
  listing: ListingLine[];
  current_breakdown?: BreakdownSegment[];
  memory_regions: MemoryRegion[];
  halt: string;
  step_count: number;
  breakpoints: number[];
}

export type Command =
  | { cmd: "load"; source: string }
  | { cmd: "step"; count?: number }
  | { cmd: "run"; max_steps?: number }
  | { cmd: "set_break"; address: number }
  | { cmd: "clear_break"; address: number }
  | { cmd: "reset" }
  | { cmd: "get_state" };

export type CommandResponse =
  | { ok: true; snapshot: Snapshot }
  | { ok: false; error: string; line?: number };

export type Radix = "dec" | "hex" | "bin";

// All machine truth lives in the snapshot; the rest is presentation state.
export interface ViewState {
  snapshot: Snapshot | null;
  radix: Radix;
  foldedLabels: Set<string>;
  foldedRegions: Set<string>;
}

export type UserAction =
  | { kind: "load_file"; file: File }
  | { kind: "step" }
  | { kind: "run" }
  | { kind: "reset" }
  | { kind: "context_break_toggle"; address: number }
  | { kind: "fold_label"; label: string }
  | { kind: "fold_region"; region: string }
  | { kind: "set_radix"; radix: Radix };

export interface Transport {
  send(command: Command): Promise<CommandResponse>;
}
