/** Figure builders. Every number shown comes straight from the experiment
 * CSVs or from the least-squares fit labelled on the plot; nothing is
 * recomputed from physics. */

import { readFileSync } from "fs";
import { join } from "path";

import { columns, readCsv, requireCurve, Table } from "./csv.js";
import { linearFit, roundSig } from "./fit.js";
import { document, linearScale, logScale, Panel } from "./svg.js";

export interface Fig4Fit {
    slope: number;
    intercept: number;
    rSquared: number;
    pointsUsed: number;
    saturationBias: number;
}

export function renderDelayScan(table: Table): string {
    requireCurve(table);
    const [delays, rates, currents] = columns(
        table, ["delay_s", "count_rate_hz", "photocurrent_a"]);
    const ps = delays.map((d) => d * 1e12);
    const mhz = rates.map((r) => r / 1e6);
    const na = currents.map((c) => c * 1e9);
    const panel = new Panel({
        x: 0, y: 0, width: 640, height: 420,
        title: "Count rate and photocurrent vs laser pulse delay",
        xLabel: "laser pulse delay (ps)",
        yLabel: "count rate (MHz)",
        y2Label: "photocurrent (nA)",
    });
    const xs = linearScale(ps, panel.xRange());
    const yl = linearScale(mhz, panel.yRange());
    const yr = linearScale(na, panel.yRange());
    panel.drawFrame(xs, yl, yr);
    panel.polyline(xs, yl, ps, mhz, "#1f77b4");
    panel.scatter(xs, yl, ps, mhz, "#1f77b4");
    panel.polyline(xs, yr, ps, na, "#d62728");
    panel.label(panel.left + 8, panel.top + 14, "count rate", "#1f77b4");
    panel.label(panel.left + 8, panel.top + 28, "photocurrent", "#d62728");
    return document(640, 420, panel.render());
}

export function renderPerformance(table: Table): string {
    requireCurve(table);
    const [eta, pd, pa] = columns(table, ["eta_net", "p_d_per_gate", "p_a"]);
    const keep = eta.map((e, i) => ({ e, pd: pd[i], pa: pa[i] }))
        .filter((r) => r.e > 0 && r.pd > 0 && r.pa > 0);
    if (keep.length < 2) {
        throw new Error("need at least 2 points with positive eta, P_d, P_a");
    }
    const es = keep.map((r) => r.e);
    const top = new Panel({
        x: 0, y: 0, width: 560, height: 300,
        title: "Dark count probability vs net detection efficiency",
        xLabel: "net detection efficiency", yLabel: "P_d (per gate)",
    });
    const xs1 = linearScale(es, top.xRange());
    const ys1 = logScale(keep.map((r) => r.pd), top.yRange());
    top.drawFrame(xs1, ys1);
    top.polyline(xs1, ys1, es, keep.map((r) => r.pd), "#1f77b4");
    top.scatter(xs1, ys1, es, keep.map((r) => r.pd), "#1f77b4");

    const bottom = new Panel({
        x: 0, y: 300, width: 560, height: 300,
        title: "Afterpulse probability vs net detection efficiency",
        xLabel: "net detection efficiency", yLabel: "P_a (per count)",
    });
    const xs2 = linearScale(es, bottom.xRange());
    const ys2 = logScale(keep.map((r) => r.pa), bottom.yRange());
    bottom.drawFrame(xs2, ys2);
    bottom.polyline(xs2, ys2, es, keep.map((r) => r.pa), "#d62728");
    bottom.scatter(xs2, ys2, es, keep.map((r) => r.pa), "#d62728");
    return document(560, 600, top.render() + "\n" + bottom.render());
}

export function renderAfterpulseCharge(table: Table, saturationBias: number):
        { svg: string; fit: Fig4Fit } {
    requireCurve(table);
    const [bias, q, pa] = columns(table, ["bias_v", "q_c", "p_a"]);
    const sat: number[] = [];
    const satPa: number[] = [];
    const art: number[] = [];
    const artPa: number[] = [];
    for (let i = 0; i < bias.length; i++) {
        if (!Number.isFinite(q[i]) || !Number.isFinite(pa[i])) {
            continue; // starved point with an undefined estimate
        }
        if (bias[i] >= saturationBias) {
            sat.push(q[i]);
            satPa.push(pa[i]);
        } else {
            art.push(q[i]);
            artPa.push(pa[i]);
        }
    }
    const fit = linearFit(sat, satPa);
    const qPc = sat.concat(art).map((v) => v * 1e12);
    const panel = new Panel({
        x: 0, y: 0, width: 620, height: 440,
        title: "Afterpulse probability vs avalanche charge",
        xLabel: "avalanche charge (pC)", yLabel: "P_a (per count)",
    });
    const xs = linearScale(qPc, panel.xRange());
    const ys = linearScale(satPa.concat(artPa).concat([0]), panel.yRange());
    panel.drawFrame(xs, ys);
    panel.scatter(xs, ys, sat.map((v) => v * 1e12), satPa, "#1f77b4");
    if (art.length > 0) {
        panel.scatter(xs, ys, art.map((v) => v * 1e12), artPa, "#d62728", true);
        panel.label(panel.left + 8, panel.top + 28,
                    "open: low-bias artifact branch (excluded from fit)", "#d62728");
    }
    // fit line across the saturated charge span, slope back in per-pC units
    const lo = Math.min(...sat) * 1e12;
    const hi = Math.max(...sat) * 1e12;
    const slopePc = fit.slope * 1e-12;
    panel.polyline(xs, ys, [lo, hi],
                   [fit.intercept + slopePc * lo, fit.intercept + slopePc * hi],
                   "#444");
    panel.annotate(panel.left + 8, panel.bottom - 44, [
        `fit over ${sat.length} points with bias >= ${saturationBias} V:`,
        `slope = ${roundSig(fit.slope, 4).toExponential(3)} /C,  ` +
        `intercept = ${roundSig(fit.intercept, 4).toExponential(3)}`,
        `R^2 = ${roundSig(fit.rSquared, 4)}`,
    ]);
    return {
        svg: document(620, 440, panel.render()),
        fit: {
            slope: fit.slope,
            intercept: fit.intercept,
            rSquared: fit.rSquared,
            pointsUsed: sat.length,
            saturationBias,
        },
    };
}

export function saturationBiasFromManifest(dir: string): number {
    const manifest = JSON.parse(readFileSync(join(dir, "manifest.json"), "utf8"));
    const v = manifest?.config?.["sweep.saturation_bias_v"];
    if (typeof v !== "number") {
        throw new Error("manifest.json lacks config key sweep.saturation_bias_v");
    }
    return v;
}

export interface RenderedFigure {
    name: string;
    content: string;
}

/** Render every figure whose inputs exist under `dir`. */
export function renderAll(dir: string): RenderedFigure[] {
    const out: RenderedFigure[] = [];
    const tryRead = (name: string): Table | null => {
        try {
            return readCsv(join(dir, name));
        } catch (err: unknown) {
            if ((err as NodeJS.ErrnoException).code === "ENOENT") {
                return null;
            }
            throw err;
        }
    };
    const scan = tryRead("delay_scan.csv");
    if (scan) {
        out.push({ name: "fig2_delay_scan.svg", content: renderDelayScan(scan) });
    }
    const sweep = tryRead("bias_sweep.csv");
    if (sweep) {
        out.push({ name: "fig3_performance.svg", content: renderPerformance(sweep) });
        let saturation: number | null = null;
        try {
            saturation = saturationBiasFromManifest(dir);
        } catch {
            saturation = null; // plain bias sweep without a fit branch
        }
        if (saturation !== null) {
            const { svg } = renderAfterpulseCharge(sweep, saturation);
            out.push({ name: "fig4_afterpulse_charge.svg", content: svg });
        }
    }
    if (out.length === 0) {
        throw new Error(`no renderable CSV inputs found in ${dir}`);
    }
    return out;
}
