import { ResultRow } from './csv.js';

/** Fixed palette keyed by model name; unknown models fall back by index. */
const MODEL_COLORS: Record<string, string> = {
  transe: '#3b82f6',
  distmult: '#22c55e',
  convkb: '#f59e0b',
};
const FALLBACK_COLORS = ['#8b5cf6', '#ef4444', '#14b8a6', '#a16207'];

export function modelColor(model: string, index: number): string {
  return MODEL_COLORS[model] ?? FALLBACK_COLORS[index % FALLBACK_COLORS.length];
}

export function mean(values: number[]): number {
  return values.reduce((a, b) => a + b, 0) / values.length;
}

export interface Group<K> {
  key: K;
  rows: ResultRow[];
}

/** Group rows by a derived key, deterministically ordered by the key's
 * JSON form (numbers compare numerically via padded segments upstream). */
export function groupBy<K>(rows: ResultRow[], key: (r: ResultRow) => K): Group<K>[] {
  const buckets = new Map<string, Group<K>>();
  for (const row of rows) {
    const k = key(row);
    const id = JSON.stringify(k);
    let group = buckets.get(id);
    if (!group) {
      group = { key: k, rows: [] };
      buckets.set(id, group);
    }
    group.rows.push(row);
  }
  return [...buckets.entries()]
    .sort(([a], [b]) => (a < b ? -1 : a > b ? 1 : 0))
    .map(([, g]) => g);
}

/** Sort helper: models, then graphs, then numeric thread count, then backend. */
export function orderKey(model: string, graph: string, threads: number, backend = ''): string[] {
  return [model, graph, String(threads).padStart(6, '0'), backend];
}
