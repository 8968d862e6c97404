/**
 * Strict reader for the simulator's CSV outputs. The schemas never quote
 * fields, so a plain comma split is exact. Inputs are never mutated.
 */

export interface Table {
  header: string[];
  rows: string[][];
}

export function parseCsv(text: string): Table {
  const lines = text.split(/\r?\n/).filter((l) => l.length > 0);
  if (lines.length === 0) {
    throw new Error("empty CSV: no header row");
  }
  const header = lines[0].split(",");
  const rows = lines.slice(1).map((line, i) => {
    const cells = line.split(",");
    if (cells.length !== header.length) {
      throw new Error(`row ${i + 2}: expected ${header.length} fields, got ${cells.length}`);
    }
    return cells;
  });
  return { header, rows };
}

export function columnIndex(table: Table, name: string): number {
  const idx = table.header.indexOf(name);
  if (idx < 0) {
    throw new Error(`missing column "${name}" (header: ${table.header.join(",")})`);
  }
  return idx;
}

export function numericColumn(table: Table, name: string): number[] {
  const idx = columnIndex(table, name);
  return table.rows.map((r, i) => {
    const v = Number(r[idx]);
    if (!Number.isFinite(v)) {
      throw new Error(`row ${i + 2}: non-numeric value "${r[idx]}" in column "${name}"`);
    }
    return v;
  });
}
