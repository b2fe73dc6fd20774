import { describe, expect, it } from "vitest";

import { ApiClient, ApiError } from "../src/api";

function jsonResponse(body: unknown, status = 200): Response {
  return new Response(JSON.stringify(body), {
    status,
    headers: { "content-type": "application/json" },
  });
}

describe("what-if client", () => {
  it("aborts the previous in-flight batch when a new one is submitted", async () => {
    const aborted: boolean[] = [];
    let call = 0;
    const fetchImpl: typeof fetch = (_url, init) => {
      const index = call++;
      return new Promise<Response>((resolve, reject) => {
        init!.signal!.addEventListener("abort", () => {
          aborted[index] = true;
          reject(new DOMException("aborted", "AbortError"));
        });
        if (index === 1) {
          // only the second call ever completes
          resolve(jsonResponse({ responses: [] }));
        }
      });
    };
    const client = new ApiClient("", fetchImpl);
    const first = client.whatif("tactical", {}, [{}]);
    const second = client.whatif("tactical", {}, [{}]);
    expect(await first).toBeNull(); // superseded, not an error
    expect(await second).toEqual({ responses: [] });
    expect(aborted[0]).toBe(true);
  });

  it("raises ApiError with the service detail on 4xx", async () => {
    const fetchImpl: typeof fetch = async () =>
      jsonResponse({ detail: "missing required feature 'Age' for stage tactical" }, 400);
    const client = new ApiClient("", fetchImpl);
    await expect(client.whatif("tactical", {}, [{}])).rejects.toSatisfy((err: unknown) => {
      return err instanceof ApiError && err.status === 400 && /'Age'/.test(err.detail);
    });
  });

  it("propagates network failures so the UI can show the retry banner", async () => {
    const fetchImpl: typeof fetch = async () => {
      throw new TypeError("network down");
    };
    const client = new ApiClient("", fetchImpl);
    await expect(client.whatif("tactical", {}, [])).rejects.toThrow("network down");
  });

  it("keeps a request log in dev mode so rendered numbers are traceable", async () => {
    const fetchImpl: typeof fetch = async () => jsonResponse({ responses: [] });
    const client = new ApiClient("", fetchImpl, true);
    await client.whatif("tactical", { Age: 41 }, [{}]);
    expect(client.requestLog).toHaveLength(1);
    expect(client.requestLog[0]!.status).toBe(200);
    expect(client.requestLog[0]!.url).toBe("/v1/whatif");
  });

  it("fetches model metadata", async () => {
    const info = { stage: "tactical", version: "v1", features: [], threshold: 0.4,
                   threshold_objective: "g_mean", test_precision: 0.86, r_min: 1.1627,
                   n_trees: 80, base_score: 0.0 };
    const fetchImpl: typeof fetch = async () => jsonResponse(info);
    const client = new ApiClient("", fetchImpl);
    expect(await client.getModel()).toEqual(info);
  });

  it("surfaces 503 when no model is loaded", async () => {
    const fetchImpl: typeof fetch = async () =>
      jsonResponse({ detail: "model not loaded" }, 503);
    const client = new ApiClient("", fetchImpl);
    await expect(client.getModel()).rejects.toSatisfy(
      (err: unknown) => err instanceof ApiError && err.status === 503,
    );
  });
});
