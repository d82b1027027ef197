// Session rating submission. Out-of-range points never leave the client;
// failed posts stay queued locally until a retry succeeds.

export interface RatingSubmission {
  session_id: string;
  model: "svm" | "fnn";
  points: number;
}

export type FetchLike = (url: string, init: {
  method: string;
  headers: Record<string, string>;
  body: string;
}) => Promise<{ ok: boolean }>;

export function validPoints(points: number): boolean {
  return Number.isInteger(points) && points >= 1 && points <= 10;
}

export class RatingClient {
  pending: RatingSubmission[] = [];

  constructor(
    private readonly baseUrl: string,
    private readonly fetchLike: FetchLike,
  ) {}

  /** "sent" | "queued" | "rejected" — rejected means it never left the client. */
  async submit(rating: RatingSubmission): Promise<"sent" | "queued" | "rejected"> {
    if (!validPoints(rating.points) || !rating.session_id ||
        (rating.model !== "svm" && rating.model !== "fnn")) {
      return "rejected";
    }
    try {
      const resp = await this.fetchLike(`${this.baseUrl}/rating`, {
        method: "POST",
        headers: { "Content-Type": "application/json" },
        body: JSON.stringify(rating),
      });
      if (resp.ok) return "sent";
    } catch {
      // fall through to the queue
    }
    this.pending.push(rating);
    return "queued";
  }

  /** Retry everything still queued; returns how many were delivered. */
  async retryPending(): Promise<number> {
    const queue = this.pending;
    this.pending = [];
    let sent = 0;
    for (const rating of queue) {
      const outcome = await this.submit(rating);
      if (outcome === "sent") sent += 1;
    }
    return sent;
  }
}
