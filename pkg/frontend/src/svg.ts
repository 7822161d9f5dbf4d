/** Minimal deterministic SVG plotting: linear/log scales, axes, polylines,
 * scatter markers, and text annotations. No DOM, just strings. */

export interface Scale {
    toPx(v: number): number;
    ticks(): number[];
    domain: [number, number];
}

function span(values: number[]): [number, number] {
    let lo = Infinity;
    let hi = -Infinity;
    for (const v of values) {
        if (v < lo) lo = v;
        if (v > hi) hi = v;
    }
    if (!(lo < hi)) {
        hi = lo === 0 ? 1 : lo * 1.5;
        lo = lo === 0 ? -1 : lo * 0.5;
    }
    return [lo, hi];
}

export function linearScale(values: number[], rangePx: [number, number]): Scale {
    let [lo, hi] = span(values);
    const pad = 0.06 * (hi - lo);
    lo -= pad;
    hi += pad;
    const [r0, r1] = rangePx;
    return {
        domain: [lo, hi],
        toPx: (v) => r0 + ((v - lo) / (hi - lo)) * (r1 - r0),
        ticks: () => {
            const step = niceStep(hi - lo);
            const out: number[] = [];
            for (let t = Math.ceil(lo / step) * step; t <= hi + 1e-12 * step; t += step) {
                out.push(Math.abs(t) < step * 1e-9 ? 0 : t);
            }
            return out;
        },
    };
}

export function logScale(values: number[], rangePx: [number, number]): Scale {
    const positive = values.filter((v) => v > 0);
    if (positive.length === 0) {
        throw new Error("log scale needs positive values");
    }
    let [lo, hi] = span(positive);
    lo = Math.pow(10, Math.floor(Math.log10(lo)));
    hi = Math.pow(10, Math.ceil(Math.log10(hi)));
    const [r0, r1] = rangePx;
    const llo = Math.log10(lo);
    const lhi = Math.log10(hi);
    return {
        domain: [lo, hi],
        toPx: (v) => r0 + ((Math.log10(v) - llo) / (lhi - llo)) * (r1 - r0),
        ticks: () => {
            const out: number[] = [];
            for (let e = llo; e <= lhi + 1e-9; e += 1) {
                out.push(Math.pow(10, e));
            }
            return out;
        },
    };
}

function niceStep(extent: number): number {
    const raw = extent / 6;
    const mag = Math.pow(10, Math.floor(Math.log10(raw)));
    const norm = raw / mag;
    const nice = norm < 1.5 ? 1 : norm < 3.5 ? 2 : norm < 7.5 ? 5 : 10;
    return nice * mag;
}

export function fmtTick(v: number): string {
    if (v === 0) return "0";
    const a = Math.abs(v);
    if (a >= 1e5 || a < 1e-3) return v.toExponential(1).replace("e+", "e");
    return String(Number(v.toPrecision(6)));
}

export interface PanelOptions {
    x: number;
    y: number;
    width: number;
    height: number;
    title?: string;
    xLabel: string;
    yLabel: string;
    y2Label?: string;
}

/** One plot panel with a left (and optional right) y axis. */
export class Panel {
    private parts: string[] = [];
    readonly left: number;
    readonly right: number;
    readonly top: number;
    readonly bottom: number;

    constructor(private opts: PanelOptions) {
        this.left = opts.x + 62;
        this.right = opts.x + opts.width - (opts.y2Label ? 62 : 16);
        this.top = opts.y + (opts.title ? 26 : 12);
        this.bottom = opts.y + opts.height - 40;
    }

    xRange(): [number, number] {
        return [this.left, this.right];
    }

    yRange(): [number, number] {
        return [this.bottom, this.top];
    }

    drawFrame(xs: Scale, yLeft: Scale, yRight?: Scale): void {
        const o = this.opts;
        if (o.title) {
            this.parts.push(text((this.left + this.right) / 2, o.y + 14, o.title, "middle", 13, "bold"));
        }
        this.parts.push(line(this.left, this.bottom, this.right, this.bottom));
        this.parts.push(line(this.left, this.top, this.left, this.bottom));
        for (const t of xs.ticks()) {
            const px = xs.toPx(t);
            this.parts.push(line(px, this.bottom, px, this.bottom + 4));
            this.parts.push(text(px, this.bottom + 16, fmtTick(t), "middle", 10));
        }
        this.parts.push(text((this.left + this.right) / 2, this.bottom + 32, o.xLabel, "middle", 11));
        for (const t of yLeft.ticks()) {
            const py = yLeft.toPx(t);
            this.parts.push(line(this.left - 4, py, this.left, py));
            this.parts.push(text(this.left - 7, py + 3, fmtTick(t), "end", 10));
        }
        this.parts.push(
            `<text x="${o.x + 14}" y="${(this.top + this.bottom) / 2}" font-size="11" text-anchor="middle" ` +
            `transform="rotate(-90 ${o.x + 14} ${(this.top + this.bottom) / 2})">${escapeXml(o.yLabel)}</text>`);
        if (yRight && o.y2Label) {
            this.parts.push(line(this.right, this.top, this.right, this.bottom));
            for (const t of yRight.ticks()) {
                const py = yRight.toPx(t);
                this.parts.push(line(this.right, py, this.right + 4, py));
                this.parts.push(text(this.right + 7, py + 3, fmtTick(t), "start", 10));
            }
            const cx = o.x + o.width - 14;
            this.parts.push(
                `<text x="${cx}" y="${(this.top + this.bottom) / 2}" font-size="11" text-anchor="middle" ` +
                `transform="rotate(90 ${cx} ${(this.top + this.bottom) / 2})">${escapeXml(o.y2Label)}</text>`);
        }
    }

    polyline(xs: Scale, ys: Scale, x: number[], y: number[], color: string): void {
        const pts = x.map((v, i) => `${round2(xs.toPx(v))},${round2(ys.toPx(y[i]))}`).join(" ");
        this.parts.push(`<polyline points="${pts}" fill="none" stroke="${color}" stroke-width="1.5"/>`);
    }

    scatter(xs: Scale, ys: Scale, x: number[], y: number[], color: string, open = false): void {
        for (let i = 0; i < x.length; i++) {
            const fill = open ? "none" : color;
            this.parts.push(
                `<circle cx="${round2(xs.toPx(x[i]))}" cy="${round2(ys.toPx(y[i]))}" r="3.2" ` +
                `fill="${fill}" stroke="${color}" stroke-width="1.2"/>`);
        }
    }

    annotate(px: number, py: number, lines: string[]): void {
        lines.forEach((l, i) => {
            this.parts.push(text(px, py + 13 * i, l, "start", 10.5));
        });
    }

    label(px: number, py: number, content: string, color: string): void {
        this.parts.push(text(px, py, content, "start", 10.5, "normal", color));
    }

    render(): string {
        return this.parts.join("\n");
    }
}

function round2(v: number): number {
    return Math.round(v * 100) / 100;
}

function line(x1: number, y1: number, x2: number, y2: number): string {
    return `<line x1="${round2(x1)}" y1="${round2(y1)}" x2="${round2(x2)}" y2="${round2(y2)}" stroke="#222" stroke-width="1"/>`;
}

function text(x: number, y: number, content: string, anchor: string, size: number,
              weight = "normal", color = "#111"): string {
    return `<text x="${round2(x)}" y="${round2(y)}" font-size="${size}" text-anchor="${anchor}" ` +
        `font-weight="${weight}" fill="${color}">${escapeXml(content)}</text>`;
}

function escapeXml(s: string): string {
    return s.replace(/&/g, "&amp;").replace(/</g, "&lt;").replace(/>/g, "&gt;");
}

export function document(width: number, height: number, body: string): string {
    return `<svg xmlns="http://www.w3.org/2000/svg" width="${width}" height="${height}" ` +
        `viewBox="0 0 ${width} ${height}" font-family="Helvetica, Arial, sans-serif">\n` +
        `<rect width="${width}" height="${height}" fill="white"/>\n${body}\n</svg>\n`;
}
