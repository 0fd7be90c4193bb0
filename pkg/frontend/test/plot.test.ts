import * as fs from 'fs';
import * as os from 'os';
import * as path from 'path';
import { afterAll, beforeAll, describe, expect, it } from 'vitest';

import { loadResults, SCHEMA, SchemaError } from '../src/csv.js';
import { KINDS, parseArgs, plot, renderPlot } from '../src/plot.js';

let dir: string;
let fixtureCsv: string;

const MODELS = ['transe', 'distmult'];
const GRAPHS = ['ring-1000', 'ring-2000'];
const THREADS = [1, 2];
const BACKENDS = ['scalar', 'vector'];

function fixtureRows(): string[] {
  // deterministic synthetic measurements shaped like real harness output:
  // 2 models x 2 graphs x 2 thread counts x 2 backends
  const rows: string[] = [SCHEMA.join(',')];
  let salt = 0;
  for (const model of MODELS) {
    for (const graph of GRAPHS) {
      for (const threads of THREADS) {
        for (const backend of BACKENDS) {
          salt += 1;
          const wall = (10 + salt * 0.25) / threads + (backend === 'scalar' ? 4 : 0);
          const cpu = wall * threads * 1.1;
          const load = graph === 'ring-1000' ? 80 + salt * 0.01 : 160 + salt * 0.01;
          const total = load + 20 + salt * 0.1;
          rows.push(
            [
              '2026-01-01T00:00:00Z', model, graph, threads, backend,
              5, 2, 100, 256, 0.01, 0,
              wall.toFixed(6), cpu.toFixed(6),
              '0.010000', '0.011000', '0.001000', '0.001100',
              '0.000100', '0.000110',
              load.toFixed(2), total.toFixed(2),
            ].join(','),
          );
        }
      }
    }
  }
  return rows;
}

beforeAll(() => {
  dir = fs.mkdtempSync(path.join(os.tmpdir(), 'kgebench-plots-'));
  fixtureCsv = path.join(dir, 'results.csv');
  fs.writeFileSync(fixtureCsv, fixtureRows().join('\n') + '\n');
});

afterAll(() => {
  fs.rmSync(dir, { recursive: true, force: true });
});

function countBars(svg: string, cls = 'bar'): number {
  const re = new RegExp(`<rect class="${cls}[^"]*"`, 'g');
  return (svg.match(re) ?? []).length;
}

describe('csv loading', () => {
  it('parses the fixture and preserves field values', () => {
    const rows = loadResults(fixtureCsv);
    expect(rows).toHaveLength(16);
    expect(rows[0].model).toBe('transe');
    expect(rows[0].threads).toBe(1);
    expect(rows[0].ramPeakLoadMb).toBeGreaterThan(0);
  });

  it('names missing columns', () => {
    const bad = path.join(dir, 'bad.csv');
    fs.writeFileSync(bad, 'timestamp,model\nx,y\n');
    expect(() => loadResults(bad)).toThrowError(/wall_train_s/);
  });

  it('rejects an empty csv without writing output', () => {
    const empty = path.join(dir, 'empty.csv');
    fs.writeFileSync(empty, SCHEMA.join(',') + '\n');
    const out = path.join(dir, 'should-not-exist.svg');
    expect(() =>
      plot({ csvPath: empty, kind: 'train-time-by-threads', outPath: out }),
    ).toThrowError(SchemaError);
    expect(fs.existsSync(out)).toBe(false);
  });

  it('treats empty memory fields as unmonitored', () => {
    const partial = path.join(dir, 'partial.csv');
    const lines = fixtureRows();
    const cells = lines[1].split(',');
    cells[cells.length - 1] = '';
    cells[cells.length - 2] = '';
    fs.writeFileSync(partial, [lines[0], cells.join(',')].join('\n') + '\n');
    const rows = loadResults(partial);
    expect(rows[0].ramPeakLoadMb).toBeNull();
  });
});

describe('figure kinds (acceptance: render, bar arithmetic, determinism)', () => {
  it('every kind renders without error and writes a file', () => {
    for (const kind of KINDS) {
      const out = path.join(dir, `${kind}.svg`);
      plot({ csvPath: fixtureCsv, kind, outPath: out });
      const svg = fs.readFileSync(out, 'utf-8');
      expect(svg.startsWith('<svg')).toBe(true);
      expect(svg.trimEnd().endsWith('</svg>')).toBe(true);
    }
  });

  it('train-time bars: one per (model, graph, threads) mean', () => {
    const svg = renderPlot({
      csvPath: fixtureCsv,
      kind: 'train-time-by-threads',
      outPath: '',
    });
    expect(countBars(svg)).toBe(MODELS.length * GRAPHS.length * THREADS.length);
  });

  it('backend-comparison bars: one per (model, graph, threads, backend)', () => {
    const svg = renderPlot({
      csvPath: fixtureCsv,
      kind: 'backend-comparison',
      outPath: '',
    });
    expect(countBars(svg)).toBe(
      MODELS.length * GRAPHS.length * THREADS.length * BACKENDS.length,
    );
    expect(countBars(svg, 'bar bar-scalar')).toBe(8);
    expect(countBars(svg, 'bar bar-vector')).toBe(8);
  });

  it('ram-usage: two series (total, load) per graph', () => {
    const svg = renderPlot({ csvPath: fixtureCsv, kind: 'ram-usage', outPath: '' });
    expect(countBars(svg, 'bar bar-total')).toBe(GRAPHS.length);
    expect(countBars(svg, 'bar bar-load')).toBe(GRAPHS.length);
  });

  it('two invocations produce identical bytes', () => {
    for (const kind of KINDS) {
      const a = path.join(dir, 'a.svg');
      const b = path.join(dir, 'b.svg');
      plot({ csvPath: fixtureCsv, kind, outPath: a });
      plot({ csvPath: fixtureCsv, kind, outPath: b });
      expect(fs.readFileSync(a)).toEqual(fs.readFileSync(b));
    }
  });

  it('plotting does not mutate the csv', () => {
    const before = fs.readFileSync(fixtureCsv, 'utf-8');
    plot({
      csvPath: fixtureCsv,
      kind: 'ram-usage',
      outPath: path.join(dir, 'mut.svg'),
    });
    expect(fs.readFileSync(fixtureCsv, 'utf-8')).toBe(before);
  });

  it('model filter narrows the bars', () => {
    const svg = renderPlot({
      csvPath: fixtureCsv,
      kind: 'train-time-by-threads',
      outPath: '',
      model: 'transe',
    });
    expect(countBars(svg)).toBe(GRAPHS.length * THREADS.length);
    expect(() =>
      renderPlot({
        csvPath: fixtureCsv,
        kind: 'train-time-by-threads',
        outPath: '',
        model: 'rotate',
      }),
    ).toThrowError(/no rows for model/);
  });

  it('cpu metric variant renders distinct values', () => {
    const wall = renderPlot({
      csvPath: fixtureCsv,
      kind: 'train-time-by-threads',
      outPath: '',
      metric: 'wall',
    });
    const cpu = renderPlot({
      csvPath: fixtureCsv,
      kind: 'train-time-by-threads',
      outPath: '',
      metric: 'cpu',
    });
    expect(wall).not.toBe(cpu);
  });
});

describe('cli argument parsing', () => {
  it('parses a full flag set', () => {
    const spec = parseArgs([
      '--csv', 'r.csv', '--kind', 'ram-usage', '--out', 'x.svg',
      '--model', 'transe',
    ]);
    expect(spec.kind).toBe('ram-usage');
    expect(spec.model).toBe('transe');
  });
});
