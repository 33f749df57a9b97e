// SVG sparkline geometry as pure string/number computation. The expected
// information trend is drawn on a log scale with a horizontal threshold
// line, since the stopping rule watches decade-scale decay.

export interface SparkModel {
  path: string;
  thresholdY: number | null;
  width: number;
  height: number;
  points: { x: number; y: number }[];
}

const FLOOR = 1e-12;

export function logSparkline(
  values: number[],
  threshold: number | null,
  width = 240,
  height = 48,
  pad = 4,
): SparkModel {
  if (values.length === 0) {
    return { path: "", thresholdY: null, width, height, points: [] };
  }
  const logs = values.map((v) => Math.log10(Math.max(v, FLOOR)));
  const candidates = threshold !== null && threshold > 0
    ? logs.concat([Math.log10(threshold)])
    : logs;
  let lo = Math.min(...candidates);
  let hi = Math.max(...candidates);
  if (hi - lo < 1e-9) {
    lo -= 0.5;
    hi += 0.5;
  }
  const xAt = (i: number) =>
    values.length === 1
      ? width / 2
      : pad + (i * (width - 2 * pad)) / (values.length - 1);
  const yAt = (logValue: number) =>
    pad + ((hi - logValue) * (height - 2 * pad)) / (hi - lo);
  const points = logs.map((lv, i) => ({ x: xAt(i), y: yAt(lv) }));
  const path = points
    .map((p, i) => `${i === 0 ? "M" : "L"}${p.x.toFixed(2)},${p.y.toFixed(2)}`)
    .join(" ");
  const thresholdY = threshold !== null && threshold > 0
    ? yAt(Math.log10(threshold))
    : null;
  return { path, thresholdY, width, height, points };
}
