import { mkdirSync, writeFileSync } from "fs";
import { join } from "path";

import { renderAll } from "./figures.js";

function parseArgs(argv: string[]): { inDir: string; outDir: string } {
    let inDir: string | null = null;
    let outDir: string | null = null;
    for (let i = 0; i < argv.length; i++) {
        if (argv[i] === "--in") inDir = argv[++i];
        else if (argv[i] === "--out") outDir = argv[++i];
        else throw new Error(`unknown argument ${argv[i]}`);
    }
    if (!inDir || !outDir) {
        throw new Error("usage: render --in <experiment dir> --out <figure dir>");
    }
    return { inDir, outDir };
}

try {
    const { inDir, outDir } = parseArgs(process.argv.slice(2));
    mkdirSync(outDir, { recursive: true });
    for (const fig of renderAll(inDir)) {
        writeFileSync(join(outDir, fig.name), fig.content);
        console.log(`wrote ${join(outDir, fig.name)}`);
    }
} catch (err) {
    console.error(String(err instanceof Error ? err.message : err));
    process.exit(1);
}
