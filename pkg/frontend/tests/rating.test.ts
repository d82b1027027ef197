import { describe, expect, it } from "vitest";

import { RatingClient, validPoints } from "../src/rating.js";

function capturingFetch(responses: boolean[] | "throw") {
  const calls: Array<{ url: string; body: unknown }> = [];
  const fetchLike = async (url: string, init: { body: string }) => {
    calls.push({ url, body: JSON.parse(init.body) });
    if (responses === "throw") throw new Error("network down");
    return { ok: responses.shift() ?? true };
  };
  return { calls, fetchLike };
}

describe("validPoints", () => {
  it("accepts exactly the integers 1..10", () => {
    for (let p = 1; p <= 10; p++) expect(validPoints(p)).toBe(true);
    expect(validPoints(0)).toBe(false);
    expect(validPoints(11)).toBe(false);
    expect(validPoints(5.5)).toBe(false);
    expect(validPoints(Number.NaN)).toBe(false);
  });
});

describe("RatingClient", () => {
  it("posts a valid rating to /rating", async () => {
    const { calls, fetchLike } = capturingFetch([true]);
    const client = new RatingClient("http://x:8081", fetchLike);
    const outcome = await client.submit({ session_id: "s1", model: "fnn", points: 9 });
    expect(outcome).toBe("sent");
    expect(calls).toHaveLength(1);
    expect(calls[0].url).toBe("http://x:8081/rating");
    expect(calls[0].body).toEqual({ session_id: "s1", model: "fnn", points: 9 });
  });

  it("rejects out-of-range points before any network traffic", async () => {
    const { calls, fetchLike } = capturingFetch([true]);
    const client = new RatingClient("http://x:8081", fetchLike);
    expect(await client.submit({ session_id: "s1", model: "svm", points: 11 })).toBe("rejected");
    expect(await client.submit({ session_id: "s1", model: "svm", points: 0 })).toBe("rejected");
    expect(calls).toHaveLength(0);
  });

  it("queues on network failure and delivers on retry", async () => {
    const failing = capturingFetch("throw");
    const client = new RatingClient("http://x:8081", failing.fetchLike);
    expect(await client.submit({ session_id: "s1", model: "svm", points: 7 })).toBe("queued");
    expect(client.pending).toHaveLength(1);

    // network comes back
    const working = capturingFetch([true]);
    (client as unknown as { fetchLike: typeof working.fetchLike }).fetchLike = working.fetchLike;
    expect(await client.retryPending()).toBe(1);
    expect(client.pending).toHaveLength(0);
    expect(working.calls).toHaveLength(1);
  });

  it("resubmission posts again (the server replaces the stored row)", async () => {
    const { calls, fetchLike } = capturingFetch([true, true]);
    const client = new RatingClient("http://x:8081", fetchLike);
    await client.submit({ session_id: "s1", model: "svm", points: 9 });
    await client.submit({ session_id: "s1", model: "svm", points: 8 });
    expect(calls).toHaveLength(2);
    expect((calls[1].body as { points: number }).points).toBe(8);
  });
});
