// Pure view-model builders: snapshot JSON in, render-ready structures out.
// Keeping these free of DOM and network makes the display logic testable
// and guarantees the dashboard never reformats server numbers beyond
// display rounding.

import type { CampaignSnapshot } from "./types.js";

export type BannerTone = "success" | "failure" | "running" | "warning";

export interface Banner {
  tone: BannerTone;
  headline: string;
  note: string;
}

export function statusBanner(snap: CampaignSnapshot): Banner {
  if (snap.outcome === "success") {
    return {
      tone: "success",
      headline: "Converged: target design located",
      note: `Solution control setting after ${snap.iteration} iterations.`,
    };
  }
  if (snap.outcome === "failure") {
    return {
      tone: "failure",
      headline: "Converged: no feasible setting found",
      note: `Expected information stayed below ${snap.eig_threshold} for ` +
        `${snap.eig_counter} consecutive checks.`,
    };
  }
  if (snap.eig_counter >= Math.max(1, snap.eig_patience - 2)) {
    return {
      tone: "warning",
      headline: "Failure imminent",
      note: `Information gain below threshold for ${snap.eig_counter} of ` +
        `${snap.eig_patience} allowed consecutive checks.`,
    };
  }
  return {
    tone: "running",
    headline: `Running: iteration ${snap.iteration}`,
    note: `${snap.n_components} covariance components, ` +
      `${snap.eig_counter}/${snap.eig_patience} low-information checks.`,
  };
}

export interface IntervalRow {
  component: number;
  ttrLow: number;
  ttrHigh: number;
  ubLow: number | null;
  ubHigh: number | null;
  fits: boolean | null;
}

export function ubVersusTtrRows(snap: CampaignSnapshot): IntervalRow[] {
  return snap.target_design.map((_, i) => {
    const [ttrLow, ttrHigh] = snap.ttr[i];
    if (!snap.ub) {
      return { component: i, ttrLow, ttrHigh, ubLow: null, ubHigh: null, fits: null };
    }
    const ubLow = snap.ub.center[i] - snap.ub.half_widths[i];
    const ubHigh = snap.ub.center[i] + snap.ub.half_widths[i];
    return {
      component: i,
      ttrLow,
      ttrHigh,
      ubLow,
      ubHigh,
      fits: ubLow >= ttrLow && ubHigh <= ttrHigh,
    };
  });
}

export interface PendingTable {
  kind: string;
  rows: { label: string; coordinates: number[] }[];
  columns: number;
}

export function pendingTable(snap: CampaignSnapshot): PendingTable | null {
  if (!snap.pending) return null;
  const batchRows = snap.pending.kind === "iteration"
    ? snap.pending.points.length - 1
    : snap.pending.points.length;
  const rows = snap.pending.points.map((coordinates, index) => ({
    label: index < batchRows ? `batch ${index + 1}` : "candidate target",
    coordinates,
  }));
  return { kind: snap.pending.kind, rows, columns: snap.target_design.length };
}

export interface EntryGrid {
  values: string[][];
}

export function emptyEntries(rows: number, columns: number): EntryGrid {
  return { values: Array.from({ length: rows }, () => Array(columns).fill("")) };
}

/** Parse one grid cell; null means not submittable. */
export function parseCell(text: string): number | null {
  const trimmed = text.trim();
  if (trimmed === "") return null;
  const value = Number(trimmed);
  return Number.isFinite(value) ? value : null;
}

export function parseEntries(grid: EntryGrid): number[][] | null {
  const parsed: number[][] = [];
  for (const row of grid.values) {
    const numbers: number[] = [];
    for (const cell of row) {
      const value = parseCell(cell);
      if (value === null) return null;
      numbers.push(value);
    }
    parsed.push(numbers);
  }
  return parsed;
}

export function canSubmit(grid: EntryGrid): boolean {
  return parseEntries(grid) !== null;
}

export interface StripPoint {
  index: number;
  value: number;
  belowThreshold: boolean;
}

export function pValueStrip(snap: CampaignSnapshot): StripPoint[] {
  return snap.p_value_history.map((value, index) => ({
    index,
    value,
    belowThreshold: value <= snap.validation_threshold,
  }));
}

export interface StaleCheck {
  stale: boolean;
  serverStep: number;
  renderedStep: number;
}

export function staleness(snap: CampaignSnapshot, renderedStep: number): StaleCheck {
  return {
    stale: snap.step_count !== renderedStep,
    serverStep: snap.step_count,
    renderedStep,
  };
}

/** Actionable message for an observation-submission error. */
export function submissionAdvice(status: number, detail: string): string {
  if (status === 409) {
    return "No batch is awaiting measurements; refresh and run a step first.";
  }
  if (status === 422) {
    return `The server rejected the values (${detail}); check row count and ` +
      "that every cell is a number.";
  }
  return `Submission failed (${detail}).`;
}

export function displayNumber(value: number, digits = 4): string {
  if (value === 0) return "0";
  const magnitude = Math.abs(value);
  if (magnitude >= 1e4 || magnitude < 1e-3) return value.toExponential(digits - 1);
  return value.toFixed(digits);
}
