import {
  ApiError,
  NextTask,
  TaskPayload,
  fetchNextTask,
  imageUrl,
  submitAnnotation,
} from "./api";
import { EditorState } from "./state";

const ANCHOR_RADIUS = 7;
const HIT_RADIUS = 12;

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

class App {
  private readonly base: string;
  private expert = "";
  private state: EditorState | null = null;
  private image: HTMLImageElement | null = null;
  private dragging: "left" | "right" | "line" | null = null;
  private dragStartY = 0;
  private dragAnchorY0 = 0;
  private dragAnchorY1 = 0;
  private inFlight = false;

  private readonly canvas = el<HTMLCanvasElement>("canvas");
  private readonly ctx = this.canvas.getContext("2d")!;
  private readonly banner = el<HTMLDivElement>("banner");
  private readonly readout = el<HTMLDivElement>("readout");
  private readonly progress = el<HTMLSpanElement>("progress");
  private readonly editor = el<HTMLDivElement>("editor");
  private readonly finished = el<HTMLDivElement>("finished");
  private readonly login = el<HTMLDivElement>("login");

  constructor() {
    const params = new URLSearchParams(window.location.search);
    this.base = params.get("api") ?? "";
    el<HTMLButtonElement>("start").addEventListener("click", () => this.start());
    el<HTMLButtonElement>("submit").addEventListener("click", () => void this.submit());
    el<HTMLButtonElement>("reset").addEventListener("click", () => {
      this.state?.reset();
      this.refresh();
    });
    this.canvas.addEventListener("pointerdown", (e) => this.pointerDown(e));
    this.canvas.addEventListener("pointermove", (e) => this.pointerMove(e));
    window.addEventListener("pointerup", () => (this.dragging = null));
    window.addEventListener("keydown", (e) => this.keyDown(e));
    const stored = window.localStorage.getItem("expert_id");
    if (stored) el<HTMLInputElement>("expert").value = stored;
  }

  private start(): void {
    const name = el<HTMLInputElement>("expert").value.trim();
    if (!name) {
      this.showBanner("enter your expert id first", null);
      return;
    }
    this.expert = name;
    window.localStorage.setItem("expert_id", name);
    this.login.hidden = true;
    void this.loadNext();
  }

  private async loadNext(): Promise<void> {
    this.hideBanner();
    let next: NextTask;
    try {
      next = await fetchNextTask(this.base, this.expert);
    } catch (err) {
      this.showBanner(`could not fetch the next task: ${describe(err)}`, () =>
        void this.loadNext(),
      );
      return;
    }
    if (next.kind === "done") {
      this.editor.hidden = true;
      this.finished.hidden = false;
      this.finished.textContent =
        `All done. ${next.completed} of ${next.total} tasks annotated. Thank you!`;
      return;
    }
    this.openTask(next.task);
  }

  private openTask(task: TaskPayload): void {
    this.state = new EditorState(task);
    this.editor.hidden = false;
    this.finished.hidden = true;
    this.progress.textContent = `${task.completed + 1} / ${task.total}`;
    this.loadImage(task);
  }

  private loadImage(task: TaskPayload): void {
    const img = new Image();
    img.onload = () => {
      this.image = img;
      this.canvas.width = task.width;
      this.canvas.height = task.height;
      this.refresh();
    };
    img.onerror = () => {
      this.showBanner("image failed to load", () => this.loadImage(task));
    };
    img.src = imageUrl(this.base, task);
  }

  private async submit(): Promise<void> {
    if (!this.state || this.inFlight) return;
    this.inFlight = true;
    try {
      await submitAnnotation(this.base, this.state.submission(this.expert));
      this.state = null;
      this.image = null;
      await this.loadNext();
    } catch (err) {
      // 409 means this task is already stored; move on instead of retrying
      if (err instanceof ApiError && err.status === 409) {
        await this.loadNext();
      } else {
        this.showBanner(`submit failed: ${describe(err)}`, () => void this.submit());
      }
    } finally {
      this.inFlight = false;
    }
  }

  private pointerDown(e: PointerEvent): void {
    if (!this.state) return;
    const { x, y } = this.canvasPoint(e);
    const s = this.state;
    if (Math.hypot(x - 0, y - s.y0) <= HIT_RADIUS * 2) this.dragging = "left";
    else if (Math.hypot(x - (s.width - 1), y - s.y1) <= HIT_RADIUS * 2) this.dragging = "right";
    else if (this.nearLine(x, y)) this.dragging = "line";
    else return;
    this.dragStartY = y;
    this.dragAnchorY0 = s.y0;
    this.dragAnchorY1 = s.y1;
    e.preventDefault();
  }

  private pointerMove(e: PointerEvent): void {
    if (!this.state || !this.dragging) return;
    const { y } = this.canvasPoint(e);
    const dy = y - this.dragStartY;
    if (this.dragging === "left") this.state.setAnchor("left", this.dragAnchorY0 + dy);
    else if (this.dragging === "right") this.state.setAnchor("right", this.dragAnchorY1 + dy);
    else {
      this.state.y0 = this.dragAnchorY0;
      this.state.y1 = this.dragAnchorY1;
      this.state.translate(dy);
    }
    this.refresh();
  }

  private keyDown(e: KeyboardEvent): void {
    if (!this.state || this.login.hidden === false) return;
    if (e.target instanceof HTMLInputElement) return;
    switch (e.key) {
      case "ArrowUp":
        this.state.nudgeHeight(-1); // visually up = smaller y
        break;
      case "ArrowDown":
        this.state.nudgeHeight(1);
        break;
      case "ArrowLeft":
        this.state.nudgeAngle(-0.1);
        break;
      case "ArrowRight":
        this.state.nudgeAngle(0.1);
        break;
      case "Enter":
        void this.submit();
        return;
      default:
        return;
    }
    e.preventDefault();
    this.refresh();
  }

  private canvasPoint(e: PointerEvent): { x: number; y: number } {
    const rect = this.canvas.getBoundingClientRect();
    return {
      x: ((e.clientX - rect.left) * this.canvas.width) / rect.width,
      y: ((e.clientY - rect.top) * this.canvas.height) / rect.height,
    };
  }

  private nearLine(x: number, y: number): boolean {
    if (!this.state) return false;
    const s = this.state;
    const t = x / (s.width - 1);
    const lineY = s.y0 + t * (s.y1 - s.y0);
    return Math.abs(y - lineY) <= HIT_RADIUS;
  }

  private refresh(): void {
    const s = this.state;
    if (!s || !this.image) return;
    const ctx = this.ctx;
    ctx.clearRect(0, 0, this.canvas.width, this.canvas.height);
    ctx.drawImage(this.image, 0, 0);

    ctx.strokeStyle = s.dirty ? "#ff9500" : "#00c853";
    ctx.lineWidth = 2;
    ctx.beginPath();
    ctx.moveTo(0, s.y0);
    ctx.lineTo(s.width - 1, s.y1);
    ctx.stroke();

    for (const [x, y] of [
      [0, s.y0],
      [s.width - 1, s.y1],
    ]) {
      ctx.beginPath();
      ctx.arc(x, y, ANCHOR_RADIUS, 0, 2 * Math.PI);
      ctx.fillStyle = "#ffffff";
      ctx.fill();
      ctx.strokeStyle = "#1565c0";
      ctx.stroke();
    }

    const r = s.readout();
    this.readout.textContent =
      `h = ${r.h.toFixed(2)} px   alpha = ${r.alpha.toFixed(2)} deg` +
      (s.dirty ? "   (modified)" : "   (as proposed)");
  }

  private showBanner(message: string, retry: (() => void) | null): void {
    this.banner.hidden = false;
    this.banner.textContent = message + " ";
    if (retry) {
      const btn = document.createElement("button");
      btn.textContent = "retry";
      btn.addEventListener("click", () => {
        this.hideBanner();
        retry();
      });
      this.banner.appendChild(btn);
    }
  }

  private hideBanner(): void {
    this.banner.hidden = true;
    this.banner.textContent = "";
  }
}

function describe(err: unknown): string {
  if (err instanceof ApiError) return `${err.status}: ${err.message}`;
  return err instanceof Error ? err.message : String(err);
}

new App();
