import { describe, expect, it } from "vitest";

import { linearFit, roundSig, sigFigsEqual } from "../src/fit.js";

describe("linearFit", () => {
    it("recovers an exact line", () => {
        const xs = [1, 2, 3, 4, 5];
        const ys = xs.map((x) => 2.5 * x - 0.75);
        const fit = linearFit(xs, ys);
        expect(fit.slope).toBeCloseTo(2.5, 12);
        expect(fit.intercept).toBeCloseTo(-0.75, 12);
        expect(fit.rSquared).toBeCloseTo(1.0, 12);
    });

    it("rejects degenerate inputs", () => {
        expect(() => linearFit([1, 2], [1, 2])).toThrow();
        expect(() => linearFit([1, 1, 1], [1, 2, 3])).toThrow();
    });

    it("r-squared drops with scatter", () => {
        const xs = [0, 1, 2, 3, 4, 5];
        const ys = [0.1, 0.9, 2.2, 2.8, 4.3, 4.7];
        const fit = linearFit(xs, ys);
        expect(fit.rSquared).toBeGreaterThan(0.97);
        expect(fit.rSquared).toBeLessThan(1.0);
    });
});

describe("significant-figure comparison", () => {
    it("rounds to significant figures", () => {
        expect(roundSig(123456, 4)).toBe(123500);
        expect(roundSig(-0.00123449, 4)).toBe(-0.001234);
    });

    it("matches to 4 figures", () => {
        expect(sigFigsEqual(4.268603e11, 4.2687e11, 4)).toBe(true);
        expect(sigFigsEqual(4.268e11, 4.274e11, 4)).toBe(false);
    });
});
