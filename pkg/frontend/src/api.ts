// Client for the annotation service. Field names follow the service's JSON
// schema (snake_case). Task payloads carry no study-group information.

export interface InitialLine {
  h: number;
  alpha: number;
  center_x: number;
}

export interface TaskPayload {
  task_id: string;
  image_id: string;
  image_url: string;
  width: number;
  height: number;
  initial: InitialLine;
  endpoints: [number, number][]; // [[0, y0], [width-1, y1]]
  completed: number;
  total: number;
}

export interface SubmissionBody {
  task_id: string;
  expert_id: string;
  endpoints: [[number, number], [number, number]];
}

export interface StoredAnnotation {
  task_id: string;
  image_id: string;
  expert_id: string;
  h: number;
  alpha: number;
  center_x: number;
  modified: boolean;
  timestamp: number;
}

export interface Progress {
  expert_id: string;
  completed: number;
  total: number;
  remaining: number;
}

export type NextTask =
  | { kind: "task"; task: TaskPayload }
  | { kind: "done"; completed: number; total: number };

export class ApiError extends Error {
  constructor(readonly status: number, message: string) {
    super(message);
    this.name = "ApiError";
  }
}

async function errorDetail(resp: Response): Promise<string> {
  try {
    const body = await resp.json();
    return typeof body.detail === "string" ? body.detail : JSON.stringify(body.detail);
  } catch {
    return resp.statusText;
  }
}

export async function fetchNextTask(base: string, expert: string): Promise<NextTask> {
  const resp = await fetch(`${base}/tasks/next?expert=${encodeURIComponent(expert)}`);
  if (resp.status === 404) {
    const body = await resp.json();
    return { kind: "done", completed: body.detail.completed, total: body.detail.total };
  }
  if (!resp.ok) throw new ApiError(resp.status, await errorDetail(resp));
  return { kind: "task", task: (await resp.json()) as TaskPayload };
}

export async function submitAnnotation(
  base: string,
  body: SubmissionBody,
): Promise<StoredAnnotation> {
  const resp = await fetch(`${base}/annotations`, {
    method: "POST",
    headers: { "Content-Type": "application/json" },
    body: JSON.stringify(body),
  });
  if (resp.status !== 201) throw new ApiError(resp.status, await errorDetail(resp));
  return (await resp.json()) as StoredAnnotation;
}

export async function fetchProgress(base: string, expert: string): Promise<Progress> {
  const resp = await fetch(`${base}/progress?expert=${encodeURIComponent(expert)}`);
  if (!resp.ok) throw new ApiError(resp.status, await errorDetail(resp));
  return (await resp.json()) as Progress;
}

export function imageUrl(base: string, task: TaskPayload): string {
  return task.image_url.startsWith("http") ? task.image_url : `${base}${task.image_url}`;
}
