// Payload shapes of the campaign service API (mirrors the JSON exactly;
// the dashboard never computes model quantities itself).

export interface PendingBatch {
  kind: "initial" | "iteration";
  points: number[][];
  n_rows: number;
}

export interface UncertaintyBox {
  center: number[];
  half_widths: number[];
}

export interface CampaignSnapshot {
  id: string;
  outcome: "running" | "success" | "failure";
  iteration: number;
  step_count: number;
  n_components: number;
  n_check: number;
  eig_counter: number;
  eig_patience: number;
  eig_threshold: number;
  validation_threshold: number;
  oracle_mode: "simulated" | "interactive";
  n_batch: number;
  seed: number;
  domain: { lower: number[]; upper: number[] };
  target_design: number[];
  tolerance: number[];
  ttr: number[][];
  target_point: number[];
  batch: number[][];
  ub: UncertaintyBox | null;
  pending: PendingBatch | null;
  eig_history: number[];
  p_value_history: number[];
}

export interface IterationRecord {
  iteration: number;
  step_index: number;
  branch: string;
  target_point: number[];
  batch_points: number[][];
  log_det_term: number;
  data_fit_term: number;
  trace_term: number;
  total: number;
  penalty: number;
  eig: number;
  statistic: number;
  dof: number;
  p_value: number;
  n_components: number;
  n_check: number;
  eig_counter: number;
  ub_center: number[];
  ub_half_widths: number[];
  ub_fits: boolean;
  n_acquired: number;
  outcome_after: string;
}

export interface JobHandle {
  job_id: string;
  status: "queued" | "running" | "done" | "error";
  error?: string | null;
}

export interface SampleRow {
  stage: string;
  point: number[];
  observation: number[];
}
