import {
  BoundariesResponse,
  DiffuseRequest,
  DiffuseResponse,
  EditRequest,
  EditResponse,
  HealthResponse,
  InterpolateRequest,
  InterpolateResponse,
  InvertRequest,
  InvertResponse,
} from "./types";

export type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

/** Server-reported failure, surfaced with the original status and message. */
export class ApiError extends Error {
  status: number;
  detail: unknown;

  constructor(status: number, message: string, detail?: unknown) {
    super(message);
    this.status = status;
    this.detail = detail;
  }
}

async function unwrap<T>(resp: Response): Promise<T> {
  const body = await resp.json().catch(() => ({}));
  if (!resp.ok) {
    const message =
      typeof body === "object" && body !== null && "error" in body
        ? String((body as { error: unknown }).error)
        : `request failed with status ${resp.status}`;
    throw new ApiError(resp.status, message, body);
  }
  return body as T;
}

/** Thin typed client; every displayed image in the UI comes through here. */
export class ApiClient {
  private base: string;
  private fetchImpl: FetchLike;

  constructor(baseUrl = "", fetchImpl?: FetchLike) {
    this.base = baseUrl.replace(/\/$/, "");
    this.fetchImpl = fetchImpl ?? ((url, init) => fetch(url, init));
  }

  private get<T>(path: string): Promise<T> {
    return this.fetchImpl(this.base + path).then((r) => unwrap<T>(r));
  }

  private post<T>(path: string, payload: unknown): Promise<T> {
    return this.fetchImpl(this.base + path, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(payload),
    }).then((r) => unwrap<T>(r));
  }

  health(): Promise<HealthResponse> {
    return this.get("/health");
  }

  boundaries(): Promise<BoundariesResponse> {
    return this.get("/boundaries");
  }

  invert(req: InvertRequest): Promise<InvertResponse> {
    return this.post("/invert", req);
  }

  edit(req: EditRequest): Promise<EditResponse> {
    return this.post("/edit", req);
  }

  interpolate(req: InterpolateRequest): Promise<InterpolateResponse> {
    return this.post("/interpolate", req);
  }

  diffuse(req: DiffuseRequest): Promise<DiffuseResponse> {
    return this.post("/diffuse", req);
  }
}
