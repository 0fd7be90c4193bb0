import * as fs from 'fs';
import Papa from 'papaparse';

/** Column order of the benchmark results schema; plots reject files that
 * do not carry every column. */
export const SCHEMA = [
  'timestamp', 'model', 'graph', 'threads', 'backend', 'epochs', 'eta',
  'batches', 'dim', 'lr', 'seed',
  'wall_train_s', 'cpu_train_s',
  'wall_infer_triples_s', 'cpu_infer_triples_s',
  'wall_infer_entities_s', 'cpu_infer_entities_s',
  'wall_infer_relations_s', 'cpu_infer_relations_s',
  'ram_peak_load_mb', 'ram_peak_total_mb',
] as const;

export interface ResultRow {
  model: string;
  graph: string;
  threads: number;
  backend: string;
  wallTrainS: number;
  cpuTrainS: number;
  /** null when the run did not monitor RAM (empty CSV fields) */
  ramPeakLoadMb: number | null;
  ramPeakTotalMb: number | null;
}

export class SchemaError extends Error {}

export function loadResults(csvPath: string): ResultRow[] {
  const text = fs.readFileSync(csvPath, 'utf-8');
  const parsed = Papa.parse<Record<string, string>>(text.trim(), {
    header: true,
    skipEmptyLines: true,
  });
  if (parsed.errors.length > 0) {
    const e = parsed.errors[0];
    throw new SchemaError(`cannot parse ${csvPath}: ${e.message} (row ${e.row})`);
  }
  const fields = parsed.meta.fields ?? [];
  const missing = SCHEMA.filter((c) => !fields.includes(c));
  if (missing.length > 0) {
    throw new SchemaError(`missing column(s) in ${csvPath}: ${missing.join(', ')}`);
  }
  if (parsed.data.length === 0) {
    throw new SchemaError(`no data rows in ${csvPath}`);
  }
  return parsed.data.map((raw, i) => {
    const num = (col: string): number => {
      const v = Number(raw[col]);
      if (!Number.isFinite(v)) {
        throw new SchemaError(`row ${i + 1}: non-numeric ${col}: ${raw[col]!}`);
      }
      return v;
    };
    const optional = (col: string): number | null =>
      raw[col] === '' ? null : num(col);
    return {
      model: raw['model']!,
      graph: raw['graph']!,
      threads: num('threads'),
      backend: raw['backend']!,
      wallTrainS: num('wall_train_s'),
      cpuTrainS: num('cpu_train_s'),
      ramPeakLoadMb: optional('ram_peak_load_mb'),
      ramPeakTotalMb: optional('ram_peak_total_mb'),
    };
  });
}
