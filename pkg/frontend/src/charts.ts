/** Summary infographics: affected-vs-total bars per asset category and a
 * road-flooding gauge. Data prep is separated from drawing so the numbers
 * can be asserted against the summary document directly. */

import type { SummaryDoc } from "./types.js";

export interface BarRow {
  name: string;
  total: number;
  affected: number;
}

export interface ChartData {
  bars: BarRow[];
  roadPct: number;
  buildingsFlooded: number;
  buildingsTotal: number;
  histogram: { bins: string[]; counts: number[] };
}

export function chartData(summary: SummaryDoc, hiddenCategories?: ReadonlySet<string>): ChartData {
  const bars = summary.categories
    .filter((c) => !hiddenCategories || !hiddenCategories.has(c.name))
    .map((c) => ({ name: c.name, total: c.total, affected: c.affected }));
  return {
    bars,
    roadPct: summary.roads.pct,
    buildingsFlooded: summary.buildings.flooded,
    buildingsTotal: summary.buildings.total,
    histogram: summary.depth_histogram,
  };
}

const BAR_BG = "#2b3a4a";
const BAR_FG = "#4da3ff";
const TEXT = "#d7e3ee";

export function drawBarChart(ctx: CanvasRenderingContext2D, data: ChartData): void {
  const { width, height } = ctx.canvas;
  ctx.clearRect(0, 0, width, height);
  ctx.font = "12px sans-serif";
  const rows = data.bars;
  if (rows.length === 0) return;
  const rowH = Math.min(26, (height - 8) / rows.length);
  const labelW = 120;
  const barW = width - labelW - 60;
  rows.forEach((row, i) => {
    const y = 6 + i * rowH;
    ctx.fillStyle = TEXT;
    ctx.textAlign = "left";
    ctx.fillText(row.name, 4, y + rowH * 0.6, labelW - 8);
    ctx.fillStyle = BAR_BG;
    ctx.fillRect(labelW, y + 3, barW, rowH - 8);
    const frac = row.total > 0 ? row.affected / row.total : 0;
    ctx.fillStyle = BAR_FG;
    ctx.fillRect(labelW, y + 3, barW * frac, rowH - 8);
    ctx.fillStyle = TEXT;
    ctx.fillText(`${row.affected}/${row.total}`, labelW + barW + 6, y + rowH * 0.6);
  });
}

export function drawRoadGauge(ctx: CanvasRenderingContext2D, pct: number): void {
  const { width, height } = ctx.canvas;
  ctx.clearRect(0, 0, width, height);
  const cx = width / 2;
  const cy = height - 12;
  const r = Math.min(width / 2 - 10, height - 24);
  ctx.lineWidth = 12;
  ctx.strokeStyle = BAR_BG;
  ctx.beginPath();
  ctx.arc(cx, cy, r, Math.PI, 2 * Math.PI);
  ctx.stroke();
  ctx.strokeStyle = BAR_FG;
  ctx.beginPath();
  ctx.arc(cx, cy, r, Math.PI, Math.PI * (1 + Math.min(pct, 100) / 100));
  ctx.stroke();
  ctx.fillStyle = TEXT;
  ctx.font = "16px sans-serif";
  ctx.textAlign = "center";
  ctx.fillText(`${pct.toFixed(1)}% roads flooded`, cx, cy - 8);
}
