import { describe, expect, it } from "vitest";

import {
  clamp,
  endpointsToParams,
  lineToParams,
  paramsToEndpoints,
  paramsToLine,
} from "../src/geometry";

describe("lineToParams", () => {
  it("evaluates h at centerX and reports the signed angle", () => {
    const p = lineToParams({ slope: 0.01, intercept: 300 }, 512);
    expect(p.h).toBeCloseTo(305.12, 9);
    expect(p.alpha).toBeCloseTo(-0.5729386976834859, 9);
  });

  it("positive alpha means the right end sits visually higher", () => {
    const p = lineToParams({ slope: -0.02, intercept: 400 }, 0);
    expect(p.h).toBeCloseTo(400, 12);
    expect(p.alpha).toBeCloseTo(1.1457628381751035, 9);
    expect(p.alpha).toBeGreaterThan(0);
  });

  it("never yields negative zero", () => {
    const p = lineToParams({ slope: -0, intercept: 200 }, 77);
    expect(Object.is(p.alpha, -0)).toBe(false);
    expect(p.alpha).toBe(0);
  });
});

describe("paramsToLine", () => {
  it("matches the 45 degree hand computation", () => {
    const line = paramsToLine({ h: 200, alpha: 45, centerX: 100 });
    expect(line.slope).toBeCloseTo(-1, 12);
    expect(line.intercept).toBeCloseTo(300, 9);
  });

  it("round trips through lineToParams", () => {
    for (const h of [0, 123.25, 540.5]) {
      for (const alpha of [-3, -0.5, 0, 0.7, 2.9]) {
        for (const centerX of [0, 512, 1023]) {
          const back = lineToParams(paramsToLine({ h, alpha, centerX }), centerX);
          expect(back.h).toBeCloseTo(h, 9);
          expect(back.alpha).toBeCloseTo(alpha, 9);
        }
      }
    }
  });
});

describe("endpoints", () => {
  it("horizontal line hits both edges at h", () => {
    const e = paramsToEndpoints({ h: 300, alpha: 0, centerX: 512 }, 1024);
    expect(e.y0).toBeCloseTo(300, 12);
    expect(e.y1).toBeCloseTo(300, 12);
  });

  it("round trips params -> endpoints -> params", () => {
    const p = { h: 211.5, alpha: -1.3, centerX: 512 };
    const back = endpointsToParams(paramsToEndpoints(p, 1024), 1024, 512);
    expect(back.h).toBeCloseTo(p.h, 9);
    expect(back.alpha).toBeCloseTo(p.alpha, 9);
  });

  it("round trips endpoints -> params -> endpoints well under a hundredth of a pixel", () => {
    const e = { y0: 287.25, y1: 302.75 };
    const p = endpointsToParams(e, 1024, 512);
    const back = paramsToEndpoints(p, 1024);
    expect(Math.abs(back.y0 - e.y0)).toBeLessThan(0.01);
    expect(Math.abs(back.y1 - e.y1)).toBeLessThan(0.01);
  });
});

describe("clamp", () => {
  it("pins values to the interval", () => {
    expect(clamp(-5, 0, 10)).toBe(0);
    expect(clamp(15, 0, 10)).toBe(10);
    expect(clamp(7, 0, 10)).toBe(7);
  });
});
