import type { Radix } from "./types.js";

export const ABI_NAMES = (
  "zero ra sp gp tp t0 t1 t2 s0 s1 a0 a1 a2 a3 a4 a5 a6 a7 " +
  "s2 s3 s4 s5 s6 s7 s8 s9 s10 s11 t3 t4 t5 t6"
).split(" ");

export function formatValue(value: number, radix: Radix): string {
  if (radix === "hex") {
    return "0x" + (value >>> 0).toString(16).padStart(8, "0");
  }
  if (radix === "bin") {
    return (value >>> 0).toString(2).padStart(32, "0");
  }
  return String(value | 0); // signed decimal
}

export function formatAddress(address: number): string {
  return "0x" + (address >>> 0).toString(16).padStart(8, "0");
}

export function escapeHtml(text: string): string {
  return text
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}
