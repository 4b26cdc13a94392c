/** Minimal CSV reader for the simulator's outputs (RFC-4180 subset).
 *
 * The producer writes plain comma-separated values with a header row and no
 * quoting except around the flags column, which never contains commas; a
 * small hand parser keeps the panel tool dependency-free.
 */

export interface Table {
  columns: string[];
  rows: string[][];
}

export function parseCsv(text: string): Table {
  const lines = text.split(/\r?\n/).filter((l) => l.length > 0);
  if (lines.length === 0) {
    return { columns: [], rows: [] };
  }
  const parseLine = (line: string): string[] => {
    const out: string[] = [];
    let cur = "";
    let quoted = false;
    for (let i = 0; i < line.length; i++) {
      const ch = line[i];
      if (quoted) {
        if (ch === '"') {
          if (line[i + 1] === '"') {
            cur += '"';
            i++;
          } else {
            quoted = false;
          }
        } else {
          cur += ch;
        }
      } else if (ch === '"') {
        quoted = true;
      } else if (ch === ",") {
        out.push(cur);
        cur = "";
      } else {
        cur += ch;
      }
    }
    out.push(cur);
    return out;
  };
  const columns = parseLine(lines[0]);
  const rows = lines.slice(1).map(parseLine);
  return { columns, rows };
}

export function numericColumn(table: Table, name: string): number[] {
  const idx = table.columns.indexOf(name);
  if (idx < 0) {
    throw new Error(`missing column '${name}' (header: ${table.columns.join(", ")})`);
  }
  return table.rows.map((r) => (r[idx] === "" ? NaN : Number(r[idx])));
}

export function hasColumnData(table: Table, name: string): boolean {
  const idx = table.columns.indexOf(name);
  if (idx < 0) return false;
  return table.rows.some((r) => r[idx] !== "" && Number.isFinite(Number(r[idx])));
}
