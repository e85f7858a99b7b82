// Waterline parameterization, mirroring the server's conventions exactly:
// image y grows downward, h is the line's y at centerX, and alpha (degrees)
// is positive when the right end of the line sits visually higher.

export interface WaterlineParams {
  h: number;
  alpha: number;
  centerX: number;
}

export interface Line {
  slope: number;
  intercept: number;
}

export interface Endpoints {
  y0: number; // line y at x = 0
  y1: number; // line y at x = width - 1
}

const DEG = 180 / Math.PI;

export function paramsToLine(p: WaterlineParams): Line {
  const slope = -Math.tan(p.alpha / DEG);
  return { slope, intercept: p.h - slope * p.centerX };
}

export function lineToParams(line: Line, centerX: number): WaterlineParams {
  return {
    h: line.slope * centerX + line.intercept + 0, // + 0 turns -0 into 0
    alpha: Math.atan(-line.slope) * DEG + 0,
    centerX,
  };
}

export function paramsToEndpoints(p: WaterlineParams, width: number): Endpoints {
  const line = paramsToLine(p);
  return { y0: line.intercept, y1: line.slope * (width - 1) + line.intercept };
}

export function endpointsToParams(e: Endpoints, width: number, centerX: number): WaterlineParams {
  const slope = (e.y1 - e.y0) / (width - 1);
  return lineToParams({ slope, intercept: e.y0 }, centerX);
}

export function clamp(v: number, lo: number, hi: number): number {
  return Math.min(hi, Math.max(lo, v));
}
