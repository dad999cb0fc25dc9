/**
 * Typed client for the review service HTTP API.
 *
 * All request/response bodies are versioned JSON ({ schema: "review/v1" }).
 * The client never sees which method produced Answer A or B — the server
 * keeps that mapping to itself and resolves it after submission.
 */

export type TextBlock = { kind: "text"; text: string };
export type ImageBlock = { kind: "image"; uri: string; alt?: string; caption?: string };
export type TableBlock = { kind: "table"; rows: string[][]; header?: boolean };
export type Block = TextBlock | ImageBlock | TableBlock;

/** Canonical serialized document record, as the pipeline exports it. */
export interface DocumentRecord {
  schema?: string;
  id: string;
  title: string;
  blocks?: Block[];
  text?: string;
}

export interface Progress {
  judged: number;
  total: number;
}

export interface ItemView {
  schema: string;
  item_id?: string;
  mode?: "AB" | "score";
  question?: string;
  documents?: DocumentRecord[];
  answer_a?: string;
  answer_b?: string | null;
  answer?: string;
  choices?: Array<string | number>;
  progress: Progress;
  done?: boolean;
}

export interface Registration {
  schema: string;
  token: string;
  annotator_id: string;
  batch: number;
  total_items: number;
}

export interface SubmitAck {
  schema: string;
  accepted: boolean;
  item_id: string;
  progress: Progress;
}

export type Choice = string | number;

export class ApiError extends Error {
  constructor(
    public status: number,
    public code: string,
    message: string,
  ) {
    super(message);
  }
}

/** What the app needs from a review backend; ReviewApi is the HTTP one. */
export interface ReviewClient {
  register(name?: string): Promise<Registration>;
  nextItem(): Promise<ItemView>;
  submitJudgment(itemId: string, choice: Choice, rationale?: string): Promise<SubmitAck>;
}

async function parseJson(response: Response): Promise<any> {
  const body = await response.json().catch(() => ({}));
  if (!response.ok) {
    throw new ApiError(response.status, body.error ?? "error", body.message ?? response.statusText);
  }
  return body;
}

export class ReviewApi implements ReviewClient {
  private token: string | null;

  constructor(
    private baseUrl: string,
    token: string | null = null,
  ) {
    this.token = token;
  }

  get authenticated(): boolean {
    return this.token !== null;
  }

  async register(name?: string): Promise<Registration> {
    const response = await fetch(`${this.baseUrl}/annotators`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(name ? { name } : {}),
    });
    const registration = (await parseJson(response)) as Registration;
    this.token = registration.token;
    return registration;
  }

  private authHeaders(): Record<string, string> {
    if (this.token === null) {
      throw new ApiError(0, "no_token", "register before fetching items");
    }
    return { Authorization: `Bearer ${this.token}` };
  }

  async nextItem(): Promise<ItemView> {
    const response = await fetch(`${this.baseUrl}/items/next`, {
      headers: this.authHeaders(),
    });
    return (await parseJson(response)) as ItemView;
  }

  async submitJudgment(itemId: string, choice: Choice, rationale?: string): Promise<SubmitAck> {
    const body: Record<string, unknown> = { item_id: itemId, choice };
    if (rationale) {
      body.rationale = rationale;
    }
    const response = await fetch(`${this.baseUrl}/judgments`, {
      method: "POST",
      headers: { "Content-Type": "application/json", ...this.authHeaders() },
      body: JSON.stringify(body),
    });
    return (await parseJson(response)) as SubmitAck;
  }
}
