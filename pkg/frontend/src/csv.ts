import { readFileSync } from "fs";

export interface Table {
    header: string[];
    rows: number[][];
}

export function parseCsv(text: string): Table {
    const lines = text.split(/\r?\n/).filter((l) => l.length > 0);
    if (lines.length === 0) {
        throw new Error("empty CSV");
    }
    const header = lines[0].split(",").map((h) => h.trim());
    const rows = lines.slice(1).map((line, i) => {
        const cells = line.split(",");
        if (cells.length !== header.length) {
            throw new Error(`row ${i + 1}: expected ${header.length} columns, got ${cells.length}`);
        }
        return cells.map((c) => {
            const cell = c.trim();
            if (cell === "nan") {
                // undefined estimate at a starved sweep point
                return NaN;
            }
            const v = Number(cell);
            if (cell === "" || !Number.isFinite(v)) {
                throw new Error(`row ${i + 1}: non-numeric cell ${JSON.stringify(c)}`);
            }
            return v;
        });
    });
    return { header, rows };
}

export function readCsv(path: string): Table {
    return parseCsv(readFileSync(path, "utf8"));
}

/** Pull named columns, failing loudly if any is missing. */
export function columns(table: Table, names: string[]): number[][] {
    const idx = names.map((n) => {
        const i = table.header.indexOf(n);
        if (i < 0) {
            throw new Error(`missing column ${JSON.stringify(n)}; have ${table.header.join(",")}`);
        }
        return i;
    });
    return names.map((_, k) => table.rows.map((r) => r[idx[k]]));
}

/** A curve needs at least two points. */
export function requireCurve(table: Table): void {
    if (table.rows.length < 2) {
        throw new Error(`cannot plot a curve from ${table.rows.length} row(s)`);
    }
}
