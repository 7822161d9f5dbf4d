export interface LinearFit {
    slope: number;
    intercept: number;
    rSquared: number;
}

/** Ordinary least squares; same formulas the simulator's analysis uses. */
export function linearFit(xs: number[], ys: number[]): LinearFit {
    const n = xs.length;
    if (n < 3 || ys.length !== n) {
        throw new Error("need at least 3 paired points");
    }
    let xm = 0;
    let ym = 0;
    for (let i = 0; i < n; i++) {
        xm += xs[i];
        ym += ys[i];
    }
    xm /= n;
    ym /= n;
    let sxx = 0;
    let sxy = 0;
    for (let i = 0; i < n; i++) {
        sxx += (xs[i] - xm) * (xs[i] - xm);
        sxy += (xs[i] - xm) * (ys[i] - ym);
    }
    if (sxx === 0) {
        throw new Error("degenerate fit: all x identical");
    }
    const slope = sxy / sxx;
    const intercept = ym - slope * xm;
    let ssRes = 0;
    let ssTot = 0;
    for (let i = 0; i < n; i++) {
        const r = ys[i] - (slope * xs[i] + intercept);
        ssRes += r * r;
        ssTot += (ys[i] - ym) * (ys[i] - ym);
    }
    return { slope, intercept, rSquared: ssTot > 0 ? 1 - ssRes / ssTot : 1 };
}

export function roundSig(x: number, digits: number): number {
    if (x === 0 || !Number.isFinite(x)) {
        return x;
    }
    const scale = Math.pow(10, digits - 1 - Math.floor(Math.log10(Math.abs(x))));
    return Math.round(x * scale) / scale;
}

/** Agreement after rounding both values to `digits` significant figures. */
export function sigFigsEqual(a: number, b: number, digits: number): boolean {
    return roundSig(a, digits) === roundSig(b, digits);
}
