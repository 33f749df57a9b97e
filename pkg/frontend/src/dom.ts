// DOM construction for the dashboard panels. Rendering never mutates the
// snapshot; it rebuilds the panel contents from the view models on every
// poll, and an error panel shows the raw payload when the schema is not
// what the client expects.

import { logSparkline } from "./sparkline.js";
import type { CampaignSnapshot } from "./types.js";
import {
  Banner,
  EntryGrid,
  displayNumber,
  pendingTable,
  pValueStrip,
  statusBanner,
  ubVersusTtrRows,
} from "./viewmodel.js";

function el(tag: string, className?: string, text?: string): HTMLElement {
  const node = document.createElement(tag);
  if (className) node.className = className;
  if (text !== undefined) node.textContent = text;
  return node;
}

export function renderErrorPanel(container: HTMLElement, message: string,
                                 payload: unknown): void {
  container.replaceChildren();
  container.append(el("div", "error-title", message));
  const raw = el("pre", "error-payload");
  raw.textContent = JSON.stringify(payload, null, 2);
  container.append(raw);
}

export function renderBanner(container: HTMLElement, banner: Banner): void {
  container.replaceChildren();
  container.className = `banner banner-${banner.tone}`;
  container.append(el("div", "banner-headline", banner.headline));
  container.append(el("div", "banner-note", banner.note));
}

export function renderIntervals(container: HTMLElement,
                                snap: CampaignSnapshot): void {
  container.replaceChildren();
  container.append(el("h3", undefined, "Uncertainty vs tolerance"));
  for (const row of ubVersusTtrRows(snap)) {
    const line = el("div", "interval-row");
    line.append(el("span", "interval-label", `design ${row.component + 1}`));
    line.append(el("span", "interval-ttr",
      `tolerance [${displayNumber(row.ttrLow)}, ${displayNumber(row.ttrHigh)}]`));
    if (row.ubLow === null || row.ubHigh === null) {
      line.append(el("span", "interval-ub", "no prediction yet"));
    } else {
      const tone = row.fits ? "fits" : "outside";
      line.append(el("span", `interval-ub interval-${tone}`,
        `predicted [${displayNumber(row.ubLow)}, ${displayNumber(row.ubHigh)}]` +
        (row.fits ? " (inside)" : " (outside)")));
    }
    container.append(line);
  }
}

export function renderEigSparkline(container: HTMLElement,
                                   snap: CampaignSnapshot): void {
  container.replaceChildren();
  container.append(el("h3", undefined,
    `Expected information (counter ${snap.eig_counter}/${snap.eig_patience})`));
  const model = logSparkline(snap.eig_history, snap.eig_threshold);
  const svg = document.createElementNS("http://www.w3.org/2000/svg", "svg");
  svg.setAttribute("width", String(model.width));
  svg.setAttribute("height", String(model.height));
  svg.setAttribute("class", "sparkline");
  if (model.thresholdY !== null) {
    const line = document.createElementNS("http://www.w3.org/2000/svg", "line");
    line.setAttribute("x1", "0");
    line.setAttribute("x2", String(model.width));
    line.setAttribute("y1", model.thresholdY.toFixed(2));
    line.setAttribute("y2", model.thresholdY.toFixed(2));
    line.setAttribute("class", "threshold-line");
    svg.append(line);
  }
  if (model.path) {
    const path = document.createElementNS("http://www.w3.org/2000/svg", "path");
    path.setAttribute("d", model.path);
    path.setAttribute("fill", "none");
    path.setAttribute("class", "trend-line");
    svg.append(path);
  }
  container.append(svg);
}

export function renderPValueStrip(container: HTMLElement,
                                  snap: CampaignSnapshot): void {
  container.replaceChildren();
  container.append(el("h3", undefined,
    `Validation P-values (threshold ${snap.validation_threshold})`));
  const strip = el("div", "pvalue-strip");
  for (const point of pValueStrip(snap)) {
    const cell = el("span",
      point.belowThreshold ? "pvalue pvalue-low" : "pvalue");
    cell.title = `step ${point.index + 1}: ${point.value}`;
    cell.style.height = `${4 + Math.round(point.value * 28)}px`;
    strip.append(cell);
  }
  container.append(strip);
}

export interface ObservationFormHooks {
  onSubmit: (rows: number[][]) => void;
  grid: EntryGrid;
  onEdit: (row: number, column: number, text: string) => void;
}

export function renderPendingForm(container: HTMLElement, snap: CampaignSnapshot,
                                  hooks: ObservationFormHooks,
                                  submittable: boolean,
                                  busy: boolean): void {
  container.replaceChildren();
  const table = pendingTable(snap);
  if (!table) {
    container.append(el("div", "no-pending",
      snap.outcome === "running"
        ? "No batch awaiting measurements; run a step."
        : "Campaign finished."));
    return;
  }
  container.append(el("h3", undefined,
    `Measure these ${table.rows.length} settings (${table.kind})`));
  const form = el("table", "pending-table") as HTMLTableElement;
  const head = el("tr");
  head.append(el("th", undefined, "setting"));
  for (let c = 0; c < table.columns; c += 1) {
    head.append(el("th", undefined, `design ${c + 1}`));
  }
  form.append(head);
  table.rows.forEach((row, r) => {
    const tr = el("tr");
    tr.append(el("td", "point-label",
      `${row.label}: (${row.coordinates.map((v) => displayNumber(v)).join(", ")})`));
    for (let c = 0; c < table.columns; c += 1) {
      const td = el("td");
      const input = document.createElement("input");
      input.type = "text";
      input.value = hooks.grid.values[r]?.[c] ?? "";
      input.addEventListener("input", () => hooks.onEdit(r, c, input.value));
      td.append(input);
      tr.append(td);
    }
    form.append(tr);
  });
  container.append(form);
  const button = document.createElement("button");
  button.textContent = busy ? "Submitting..." : "Submit measurements";
  button.disabled = !submittable || busy;
  button.addEventListener("click", () => {
    const rows = hooks.grid.values.map((row) => row.map((cell) => Number(cell)));
    hooks.onSubmit(rows);
  });
  container.append(button);
}

export function renderStatusLine(container: HTMLElement,
                                 snap: CampaignSnapshot): void {
  container.replaceChildren();
  container.append(el("span", undefined,
    `campaign ${snap.id} · ${snap.oracle_mode} · seed ${snap.seed} · ` +
    `step ${snap.step_count} · samples appended ` +
    `${snap.eig_history.length > 0 ? "yes" : "none"}`));
}

export function bannerFor(snap: CampaignSnapshot): Banner {
  return statusBanner(snap);
}
