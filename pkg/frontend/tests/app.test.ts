import { afterEach, beforeEach, describe, expect, it, vi } from "vitest";

import { ColorizeClient } from "../src/api.js";
import { App } from "../src/app.js";

const PNG_BYTES = new Uint8Array([0x89, 0x50, 0x4e, 0x47, 0x0d, 0x0a, 0x1a, 0x0a]);

function jsonResponse(body: unknown, status = 200): Response {
  return new Response(JSON.stringify(body), {
    status,
    headers: { "Content-Type": "application/json" },
  });
}

function healthOk(): Response {
  return jsonResponse({ status: "ok", checkpoints: ["abc"], version: "0.1.0" });
}

function colorizeOk(image = "UEtHUkVTVUxU"): Response {
  return jsonResponse({ image, model: "abc", elapsed_ms: 5.2 });
}

let root: HTMLElement;
let fetchMock: ReturnType<typeof vi.fn>;

beforeEach(() => {
  root = document.createElement("div");
  document.body.appendChild(root);
  fetchMock = vi.fn();
  vi.stubGlobal("fetch", fetchMock);
});

afterEach(() => {
  vi.unstubAllGlobals();
  root.remove();
});

function makeApp(): App {
  return new App(root, new ColorizeClient(""));
}

async function uploadSample(app: App, name = "in.png"): Promise<void> {
  const file = new File([PNG_BYTES], name, { type: "image/png" });
  await app.handleUpload(file);
}

async function submitPrompt(app: App, prompt: string): Promise<void> {
  (root.querySelector("#prompt-input") as HTMLInputElement).value = prompt;
  await app.handleSubmit();
}

describe("upload and preview", () => {
  it("shows a preview for an accepted image", async () => {
    fetchMock.mockResolvedValue(healthOk());
    const app = makeApp();
    await uploadSample(app, "bird.png");
    const figure = root.querySelector("#preview") as HTMLElement;
    expect(figure.hidden).toBe(false);
    expect((root.querySelector("#preview-img") as HTMLImageElement).src).toContain(
      "data:image/png;base64,",
    );
    expect(root.querySelector("#preview-name")!.textContent).toBe("bird.png");
  });

  it("rejects a text file with a visible message", async () => {
    fetchMock.mockResolvedValue(healthOk());
    const app = makeApp();
    const file = new File(["not an image"], "notes.txt", { type: "text/plain" });
    await app.handleUpload(file);
    const error = root.querySelector("#upload-error") as HTMLElement;
    expect(error.hidden).toBe(false);
    expect(error.textContent).toMatch(/notes\.txt/);
    expect((root.querySelector("#submit-btn") as HTMLButtonElement).disabled).toBe(true);
  });

  it("rejects oversized files client-side", async () => {
    fetchMock.mockResolvedValue(healthOk());
    const app = makeApp();
    const big = new File([new Uint8Array(10 * 1024 * 1024 + 1)], "big.png", {
      type: "image/png",
    });
    await app.handleUpload(big);
    expect((root.querySelector("#upload-error") as HTMLElement).hidden).toBe(false);
    expect(fetchMock).not.toHaveBeenCalledWith(
      expect.stringContaining("/api/colorize"),
      expect.anything(),
    );
  });
});

describe("prompt submission", () => {
  it("renders an attempt card after upload -> prompt", async () => {
    fetchMock.mockImplementation((url: string) =>
      Promise.resolve(String(url).includes("/api/health") ? healthOk() : colorizeOk()),
    );
    const app = makeApp();
    await uploadSample(app);
    await submitPrompt(app, "a red bird");

    const cards = root.querySelectorAll("#attempts .card");
    expect(cards).toHaveLength(1);
    expect(cards[0].querySelector(".prompt")!.textContent).toBe("a red bird");
    const result = cards[0].querySelector(".card-result") as HTMLImageElement;
    expect(result.src).toBe("data:image/png;base64,UEtHUkVTVUxU");
  });

  it("sends the base64 payload and description to the service", async () => {
    fetchMock.mockImplementation((url: string) =>
      Promise.resolve(String(url).includes("/api/health") ? healthOk() : colorizeOk()),
    );
    const app = makeApp();
    await uploadSample(app);
    await submitPrompt(app, "a blue circle");
    const colorizeCall = fetchMock.mock.calls.find(([url]) =>
      String(url).includes("/api/colorize"),
    );
    expect(colorizeCall).toBeDefined();
    const body = JSON.parse((colorizeCall![1] as RequestInit).body as string);
    expect(body.description).toBe("a blue circle");
    expect(body.image).not.toContain("data:");
    expect(body.image.length).toBeGreaterThan(0);
  });

  it("shows the no-model banner on 503", async () => {
    fetchMock.mockImplementation((url: string) =>
      Promise.resolve(
        String(url).includes("/api/health")
          ? jsonResponse({ status: "degraded", checkpoints: [], version: "0.1.0" })
          : jsonResponse({ detail: "no model loaded" }, 503),
      ),
    );
    const app = makeApp();
    await uploadSample(app);
    await submitPrompt(app, "a red bird");
    const banner = root.querySelector("#banner") as HTMLElement;
    expect(banner.hidden).toBe(false);
    expect(banner.textContent).toMatch(/no model loaded/);
    expect(root.querySelectorAll("#attempts .card")).toHaveLength(0);
  });

  it("renders distinct cards for two different prompts", async () => {
    let n = 0;
    fetchMock.mockImplementation((url: string) =>
      Promise.resolve(
        String(url).includes("/api/health") ? healthOk() : colorizeOk(`SU1HXzAw${n++}`),
      ),
    );
    const app = makeApp();
    await uploadSample(app);
    await submitPrompt(app, "a red circle");
    await submitPrompt(app, "a blue circle");
    const cards = root.querySelectorAll("#attempts .card");
    expect(cards).toHaveLength(2);
    const prompts = Array.from(cards).map((c) => c.querySelector(".prompt")!.textContent);
    expect(prompts).toEqual(["a red circle", "a blue circle"]);
    const images = Array.from(cards).map(
      (c) => (c.querySelector(".card-result") as HTMLImageElement).src,
    );
    expect(new Set(images).size).toBe(2);
  });

  it("queues a second submission while one is in flight", async () => {
    let release: (value: Response) => void = () => {};
    const gated = new Promise<Response>((resolve) => (release = resolve));
    fetchMock.mockImplementation((url: string) => {
      if (String(url).includes("/api/health")) return Promise.resolve(healthOk());
      return gated;
    });
    const app = makeApp();
    await uploadSample(app);

    (root.querySelector("#prompt-input") as HTMLInputElement).value = "first";
    const firstDone = app.handleSubmit();
    (root.querySelector("#prompt-input") as HTMLInputElement).value = "second";
    const secondDone = app.handleSubmit();

    const note = root.querySelector("#queue-note") as HTMLElement;
    expect(note.hidden).toBe(false); // pending state is visible

    fetchMock.mockImplementation((url: string) =>
      Promise.resolve(String(url).includes("/api/health") ? healthOk() : colorizeOk("Mg==")),
    );
    release(colorizeOk("MQ=="));
    await firstDone;
    await secondDone;
    expect(root.querySelectorAll("#attempts .card")).toHaveLength(2);
    expect(note.hidden).toBe(true);
  });
});

describe("comparison grid", () => {
  async function appWithAttempts(count: number): Promise<App> {
    let n = 0;
    fetchMock.mockImplementation((url: string) =>
      Promise.resolve(
        String(url).includes("/api/health") ? healthOk() : colorizeOk(`SU1HXzAw${n++}`),
      ),
    );
    const app = makeApp();
    await uploadSample(app);
    for (let i = 0; i < count; i++) {
      await submitPrompt(app, `prompt number ${i + 1}`);
    }
    return app;
  }

  function clickSelect(index: number): void {
    const boxes = root.querySelectorAll<HTMLInputElement>("#attempts .select-box");
    boxes[index].click();
  }

  it("disables compare until two attempts are selected", async () => {
    await appWithAttempts(2);
    const button = root.querySelector("#compare-btn") as HTMLButtonElement;
    expect(button.disabled).toBe(true);
    clickSelect(0);
    expect(button.disabled).toBe(true);
    clickSelect(1);
    expect(button.disabled).toBe(false);
  });

  it("renders a two-up grid with verbatim prompts", async () => {
    const app = await appWithAttempts(3);
    clickSelect(0);
    clickSelect(2);
    app.renderCompare();
    const panel = root.querySelector("#compare-panel") as HTMLElement;
    expect(panel.hidden).toBe(false);
    const captions = Array.from(
      root.querySelectorAll("#compare-grid figcaption"),
    ).map((c) => c.textContent);
    expect(captions).toEqual(["prompt number 1", "prompt number 3"]);
    expect(root.querySelectorAll("#compare-grid img")).toHaveLength(2);
  });

  it("deselecting back to one hides the comparison", async () => {
    const app = await appWithAttempts(2);
    clickSelect(0);
    clickSelect(1);
    app.renderCompare();
    expect((root.querySelector("#compare-panel") as HTMLElement).hidden).toBe(false);
    clickSelect(1); // down to one selection
    expect((root.querySelector("#compare-btn") as HTMLButtonElement).disabled).toBe(true);
    expect((root.querySelector("#compare-panel") as HTMLElement).hidden).toBe(true);
  });

  it("caps the grid at four attempts", async () => {
    const app = await appWithAttempts(5);
    for (const i of [0, 1, 2, 3, 4]) clickSelect(i);
    app.renderCompare();
    expect(root.querySelectorAll("#compare-grid figcaption").length).toBeLessThanOrEqual(4);
  });
});
