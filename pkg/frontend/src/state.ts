import { SubmissionBody, TaskPayload } from "./api";
import { WaterlineParams, clamp, endpointsToParams, paramsToEndpoints } from "./geometry";

export type AnchorEnd = "left" | "right";

// Matches the server's modified-flag rule, so the dirty indicator and the
// stored flag can never disagree.
const EPS = 1e-6;

/**
 * Editable waterline for one task.
 *
 * Anchor x positions are pinned to x=0 and x=width-1 (two degrees of freedom,
 * exactly h and alpha); only the y coordinates move. The (h, alpha) readout
 * is always derived from the anchors, never stored separately.
 */
export class EditorState {
  readonly task: TaskPayload;
  y0: number;
  y1: number;

  constructor(task: TaskPayload) {
    this.task = task;
    const [[, y0], [, y1]] = task.endpoints;
    this.y0 = y0;
    this.y1 = y1;
  }

  get width(): number {
    return this.task.width;
  }

  get height(): number {
    return this.task.height;
  }

  private get maxY(): number {
    return this.task.height - 1;
  }

  setAnchor(which: AnchorEnd, y: number): void {
    const v = clamp(y, 0, this.maxY);
    if (which === "left") this.y0 = v;
    else this.y1 = v;
  }

  /** Translate the whole line; clamped jointly so the slope survives. */
  translate(dy: number): void {
    const d = clamp(
      dy,
      -Math.min(this.y0, this.y1),
      this.maxY - Math.max(this.y0, this.y1),
    );
    this.y0 += d;
    this.y1 += d;
  }

  readout(): WaterlineParams {
    return endpointsToParams(
      { y0: this.y0, y1: this.y1 },
      this.width,
      this.task.initial.center_x,
    );
  }

  /** Move anchors to match the given parameters (anchors clamp individually). */
  setParams(p: WaterlineParams): void {
    const e = paramsToEndpoints(p, this.width);
    this.y0 = clamp(e.y0, 0, this.maxY);
    this.y1 = clamp(e.y1, 0, this.maxY);
  }

  nudgeHeight(dPx: number): void {
    this.translate(dPx);
  }

  nudgeAngle(dDeg: number): void {
    const r = this.readout();
    this.setParams({ ...r, alpha: r.alpha + dDeg });
  }

  reset(): void {
    const [[, y0], [, y1]] = this.task.endpoints;
    this.y0 = y0;
    this.y1 = y1;
  }

  get dirty(): boolean {
    const r = this.readout();
    return (
      Math.abs(r.h - this.task.initial.h) > EPS ||
      Math.abs(r.alpha - this.task.initial.alpha) > EPS
    );
  }

  submission(expertId: string): SubmissionBody {
    return {
      task_id: this.task.task_id,
      expert_id: expertId,
      endpoints: [
        [0, this.y0],
        [this.width - 1, this.y1],
      ],
    };
  }
}
