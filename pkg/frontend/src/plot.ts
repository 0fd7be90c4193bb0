import * as fs from 'fs';
import * as path from 'path';
import { fileURLToPath } from 'url';

import { loadResults, ResultRow, SchemaError } from './csv.js';
import { groupBy, mean, modelColor, orderKey } from './aggregate.js';
import { Bar, renderBarChart } from './svg.js';

export const KINDS = ['train-time-by-threads', 'backend-comparison', 'ram-usage'] as const;
export type Kind = (typeof KINDS)[number];

export interface PlotSpec {
  csvPath: string;
  kind: Kind;
  outPath: string;
  model?: string;
  metric?: 'wall' | 'cpu';
}

function filterModel(rows: ResultRow[], model?: string): ResultRow[] {
  if (!model) return rows;
  const kept = rows.filter((r) => r.model === model);
  if (kept.length === 0) {
    throw new SchemaError(`no rows for model ${model}`);
  }
  return kept;
}

function trainTimeBars(rows: ResultRow[], metric: 'wall' | 'cpu'): Bar[] {
  const groups = groupBy(rows, (r) => orderKey(r.model, r.graph, r.threads));
  const models = [...new Set(rows.map((r) => r.model))].sort();
  return groups.map((g) => {
    const r0 = g.rows[0];
    const values = g.rows.map((r) => (metric === 'wall' ? r.wallTrainS : r.cpuTrainS));
    return {
      label: `${r0.model}/${r0.graph}/T${r0.threads}`,
      value: mean(values),
      color: modelColor(r0.model, models.indexOf(r0.model)),
      cssClass: 'bar',
    };
  });
}

function backendBars(rows: ResultRow[], metric: 'wall' | 'cpu'): Bar[] {
  const groups = groupBy(rows, (r) => orderKey(r.model, r.graph, r.threads, r.backend));
  return groups.map((g) => {
    const r0 = g.rows[0];
    const values = g.rows.map((r) => (metric === 'wall' ? r.wallTrainS : r.cpuTrainS));
    return {
      label: `${r0.model}/${r0.graph}/T${r0.threads}/${r0.backend}`,
      value: mean(values),
      color: r0.backend === 'scalar' ? '#9ca3af' : '#3b82f6',
      cssClass: `bar bar-${r0.backend}`,
    };
  });
}

function ramBars(rows: ResultRow[]): Bar[] {
  const monitored = rows.filter(
    (r) => r.ramPeakLoadMb !== null && r.ramPeakTotalMb !== null,
  );
  if (monitored.length === 0) {
    throw new SchemaError('no rows carry RAM measurements (runs without --monitor-ram?)');
  }
  const groups = groupBy(monitored, (r) => [r.graph]);
  const bars: Bar[] = [];
  for (const g of groups) {
    const graph = g.rows[0].graph;
    bars.push({
      label: `${graph} total`,
      value: mean(g.rows.map((r) => r.ramPeakTotalMb!)),
      color: '#3b82f6',
      cssClass: 'bar bar-total',
    });
    bars.push({
      label: `${graph} load`,
      value: mean(g.rows.map((r) => r.ramPeakLoadMb!)),
      color: '#ef4444',
      cssClass: 'bar bar-load',
    });
  }
  return bars;
}

export function renderPlot(spec: PlotSpec): string {
  const rows = filterModel(loadResults(spec.csvPath), spec.model);
  const metric = spec.metric ?? 'wall';
  const metricLabel = metric === 'wall' ? 'wall clock' : 'CPU';
  const suffix = spec.model ? ` (${spec.model})` : '';
  switch (spec.kind) {
    case 'train-time-by-threads':
      return renderBarChart(
        `Training ${metricLabel} time by model, graph, threads${suffix}`,
        `${metricLabel} train time (s)`,
        trainTimeBars(rows, metric),
      );
    case 'backend-comparison':
      return renderBarChart(
        `Training ${metricLabel} time: scalar vs vectorized backend${suffix}`,
        `${metricLabel} train time (s)`,
        backendBars(rows, metric),
      );
    case 'ram-usage':
      return renderBarChart(
        `Peak RAM: total vs after graph load${suffix}`,
        'peak RSS (MiB)',
        ramBars(rows),
      );
  }
}

export function plot(spec: PlotSpec): void {
  const svg = renderPlot(spec); // render fully before touching the filesystem
  fs.mkdirSync(path.dirname(path.resolve(spec.outPath)), { recursive: true });
  fs.writeFileSync(spec.outPath, svg, 'utf-8');
}

function usage(): never {
  process.stderr.write(
    `usage: plot --csv PATH --kind {${KINDS.join('|')}} --out PATH ` +
      '[--model NAME] [--metric wall|cpu]\n',
  );
  process.exit(2);
}

export function parseArgs(argv: string[]): PlotSpec {
  const flags = new Map<string, string>();
  for (let i = 0; i < argv.length; i += 2) {
    const name = argv[i];
    const value = argv[i + 1];
    if (!name?.startsWith('--') || value === undefined) usage();
    flags.set(name.slice(2), value);
  }
  const csvPath = flags.get('csv');
  const kind = flags.get('kind') as Kind | undefined;
  const outPath = flags.get('out');
  const metric = (flags.get('metric') ?? 'wall') as 'wall' | 'cpu';
  if (!csvPath || !kind || !outPath) usage();
  if (!KINDS.includes(kind)) usage();
  if (metric !== 'wall' && metric !== 'cpu') usage();
  return { csvPath, kind, outPath, model: flags.get('model'), metric };
}

function main(): void {
  const spec = parseArgs(process.argv.slice(2));
  try {
    plot(spec);
  } catch (err) {
    process.stderr.write(`error: ${err instanceof Error ? err.message : err}\n`);
    process.exit(1);
  }
}

if (process.argv[1] && fileURLToPath(import.meta.url) === path.resolve(process.argv[1])) {
  main();
}
