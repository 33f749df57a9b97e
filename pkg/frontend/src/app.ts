// Dashboard wiring: poll the campaign state every two seconds, rebuild the
// panels, and funnel operator actions (step, submit measurements) through
// at most one in-flight mutation. The server is the only source of numeric
// truth; this file only moves JSON around.

import { ApiError, CampaignClient } from "./api.js";
import {
  bannerFor,
  renderBanner,
  renderEigSparkline,
  renderErrorPanel,
  renderIntervals,
  renderPendingForm,
  renderPValueStrip,
  renderStatusLine,
} from "./dom.js";
import type { CampaignSnapshot } from "./types.js";
import { EntryGrid, canSubmit, emptyEntries, parseEntries, staleness,
         submissionAdvice } from "./viewmodel.js";

const POLL_MS = 2000;

interface Panels {
  banner: HTMLElement;
  status: HTMLElement;
  intervals: HTMLElement;
  eig: HTMLElement;
  pvalues: HTMLElement;
  pending: HTMLElement;
  messages: HTMLElement;
  stepButton: HTMLButtonElement;
}

export class Dashboard {
  private client: CampaignClient;
  private panels: Panels;
  private grid: EntryGrid = emptyEntries(0, 0);
  private gridKey = "";
  private mutationInFlight = false;
  private renderedStep = -1;

  constructor(client: CampaignClient, panels: Panels) {
    this.client = client;
    this.panels = panels;
    panels.stepButton.addEventListener("click", () => void this.runStep());
  }

  start(): void {
    void this.poll();
    setInterval(() => void this.poll(), POLL_MS);
  }

  private async poll(): Promise<void> {
    let snap: CampaignSnapshot;
    try {
      snap = await this.client.state();
    } catch (error) {
      renderErrorPanel(this.panels.messages, "state request failed",
        error instanceof ApiError ? error.detail : String(error));
      return;
    }
    if (!Array.isArray(snap.target_design) || !Array.isArray(snap.eig_history)) {
      renderErrorPanel(this.panels.messages, "unexpected state payload", snap);
      return;
    }
    this.render(snap);
  }

  private render(snap: CampaignSnapshot): void {
    const stale = staleness(snap, this.renderedStep);
    if (stale.stale) {
      this.renderedStep = snap.step_count;
    }
    // Reset the entry grid whenever a different batch is pending.
    const key = snap.pending
      ? `${snap.step_count}:${snap.pending.kind}:${snap.pending.n_rows}`
      : "";
    if (key !== this.gridKey) {
      this.gridKey = key;
      this.grid = snap.pending
        ? emptyEntries(snap.pending.n_rows, snap.target_design.length)
        : emptyEntries(0, 0);
    }
    renderBanner(this.panels.banner, bannerFor(snap));
    renderStatusLine(this.panels.status, snap);
    renderIntervals(this.panels.intervals, snap);
    renderEigSparkline(this.panels.eig, snap);
    renderPValueStrip(this.panels.pvalues, snap);
    renderPendingForm(this.panels.pending, snap, {
      grid: this.grid,
      onEdit: (row, column, text) => {
        this.grid.values[row][column] = text;
        void this.poll();
      },
      onSubmit: (rows) => void this.submit(rows),
    }, canSubmit(this.grid), this.mutationInFlight);
    this.panels.stepButton.disabled =
      this.mutationInFlight || snap.outcome !== "running"
      || (snap.oracle_mode === "interactive" && snap.pending !== null);
  }

  private async submit(_rows: number[][]): Promise<void> {
    if (this.mutationInFlight) return;
    const rows = parseEntries(this.grid);
    if (rows === null) return;
    this.mutationInFlight = true;
    try {
      await this.client.submitObservations(rows);
      this.panels.messages.replaceChildren();
      this.grid = emptyEntries(0, 0);
      this.gridKey = "";
    } catch (error) {
      const message = error instanceof ApiError
        ? submissionAdvice(error.status, error.detail)
        : String(error);
      renderErrorPanel(this.panels.messages, "submission rejected", message);
    } finally {
      this.mutationInFlight = false;
      await this.poll();
    }
  }

  private async runStep(): Promise<void> {
    if (this.mutationInFlight) return;
    this.mutationInFlight = true;
    try {
      const job = await this.client.step();
      const finished = await this.client.waitForJob(job.job_id);
      if (finished.status === "error") {
        renderErrorPanel(this.panels.messages, "step failed",
          finished.error ?? "unknown error");
      } else {
        this.panels.messages.replaceChildren();
      }
    } catch (error) {
      renderErrorPanel(this.panels.messages, "step request failed",
        error instanceof ApiError ? error.detail : String(error));
    } finally {
      this.mutationInFlight = false;
      await this.poll();
    }
  }
}

export function mount(base: string, campaignId: string): Dashboard {
  const byId = (id: string) => {
    const node = document.getElementById(id);
    if (!node) throw new Error(`missing #${id}`);
    return node as HTMLElement;
  };
  const dashboard = new Dashboard(new CampaignClient(base, campaignId), {
    banner: byId("banner"),
    status: byId("status"),
    intervals: byId("intervals"),
    eig: byId("eig"),
    pvalues: byId("pvalues"),
    pending: byId("pending"),
    messages: byId("messages"),
    stepButton: byId("step-button") as HTMLButtonElement,
  });
  dashboard.start();
  return dashboard;
}
