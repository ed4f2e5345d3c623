// Application shell: upload panel, prompt form, attempt history and the
// comparison grid.  One colorize request is in flight at a time; further
// submissions wait in a visible queue.

import { ColorizeClient, ServiceError, dataUrlToBase64 } from "./api.js";
import { MIN_COMPARE, MAX_COMPARE, SessionStore } from "./state.js";
import { loadUpload, UploadedImage, UploadError } from "./upload.js";

interface QueuedPrompt {
  prompt: string;
  source: UploadedImage;
}

export class App {
  readonly store = new SessionStore();
  private source: UploadedImage | null = null;
  private queue: QueuedPrompt[] = [];
  private inFlight = false;

  constructor(
    private readonly root: HTMLElement,
    private readonly client: ColorizeClient,
  ) {
    this.renderSkeleton();
    this.store.subscribe(() => this.renderAttempts());
    void this.refreshHealth();
  }

  // ---- DOM scaffolding ----------------------------------------------------

  private renderSkeleton(): void {
    this.root.innerHTML = `
      <header class="topbar">
        <h1>Prompt-driven recolorization</h1>
        <span id="health" class="health" data-status="unknown">checking service…</span>
      </header>
      <div id="banner" class="banner" hidden></div>
      <main class="layout">
        <section class="panel">
          <h2>1 · Grayscale image</h2>
          <input type="file" id="file-input" accept="image/*" />
          <p id="upload-error" class="error" hidden></p>
          <figure id="preview" hidden>
            <img id="preview-img" alt="uploaded preview" />
            <figcaption id="preview-name"></figcaption>
          </figure>
        </section>
        <section class="panel">
          <h2>2 · Color description</h2>
          <form id="prompt-form">
            <input type="text" id="prompt-input" maxlength="1024"
                   placeholder="e.g. a red bird with a yellow beak" />
            <button type="submit" id="submit-btn" disabled>Colorize</button>
          </form>
          <p id="queue-note" class="pending" hidden></p>
        </section>
      </main>
      <section class="panel">
        <h2>Attempts</h2>
        <button id="compare-btn" disabled>Compare selected</button>
        <div id="attempts" class="cards"></div>
      </section>
      <section class="panel" id="compare-panel" hidden>
        <h2>Side by side</h2>
        <div id="compare-grid" class="compare"></div>
      </section>
    `;

    this.el<HTMLInputElement>("file-input").addEventListener("change", (event) => {
      const input = event.target as HTMLInputElement;
      const file = input.files && input.files[0];
      if (file) void this.handleUpload(file);
    });
    this.el<HTMLFormElement>("prompt-form").addEventListener("submit", (event) => {
      event.preventDefault();
      void this.handleSubmit();
    });
    this.el<HTMLButtonElement>("compare-btn").addEventListener("click", () => {
      this.renderCompare();
    });
  }

  private el<T extends HTMLElement>(id: string): T {
    const node = this.root.querySelector(`#${id}`);
    if (!node) throw new Error(`missing element #${id}`);
    return node as T;
  }

  // ---- health / banner ----------------------------------------------------

  async refreshHealth(): Promise<void> {
    const badge = this.el<HTMLElement>("health");
    try {
      const health = await this.client.health();
      badge.dataset.status = health.status;
      badge.textContent =
        health.status === "ok"
          ? `service ok · ${health.checkpoints.length} model(s)`
          : "service degraded · no model loaded";
    } catch {
      badge.dataset.status = "down";
      badge.textContent = "service unreachable";
    }
  }

  showBanner(message: string): void {
    const banner = this.el<HTMLElement>("banner");
    banner.textContent = message;
    banner.hidden = false;
  }

  clearBanner(): void {
    const banner = this.el<HTMLElement>("banner");
    banner.hidden = true;
    banner.textContent = "";
  }

  // ---- upload ---------------------------------------------------------------

  async handleUpload(file: File): Promise<void> {
    const errorNode = this.el<HTMLElement>("upload-error");
    try {
      this.source = await loadUpload(file);
      errorNode.hidden = true;
      const figure = this.el<HTMLElement>("preview");
      figure.hidden = false;
      this.el<HTMLImageElement>("preview-img").src = this.source.previewUrl;
      this.el<HTMLElement>("preview-name").textContent = this.source.fileName;
      this.el<HTMLButtonElement>("submit-btn").disabled = false;
    } catch (err) {
      this.source = null;
      this.el<HTMLButtonElement>("submit-btn").disabled = true;
      errorNode.textContent =
        err instanceof UploadError ? err.message : "could not load the file";
      errorNode.hidden = false;
    }
  }

  // ---- prompt submission with a single-flight queue -------------------------

  async handleSubmit(): Promise<void> {
    const input = this.el<HTMLInputElement>("prompt-input");
    if (!this.source) {
      this.showBanner("upload an image first");
      return;
    }
    this.queue.push({ prompt: input.value, source: this.source });
    this.renderQueueNote();
    if (!this.inFlight) await this.drainQueue();
  }

  private async drainQueue(): Promise<void> {
    this.inFlight = true;
    try {
      while (this.queue.length > 0) {
        const job = this.queue.shift() as QueuedPrompt;
        this.renderQueueNote(job.prompt);
        await this.runJob(job);
      }
    } finally {
      this.inFlight = false;
      this.renderQueueNote();
    }
  }

  private async runJob(job: QueuedPrompt): Promise<void> {
    try {
      const result = await this.client.colorize(dataUrlToBase64(job.source.dataUrl), job.prompt);
      this.clearBanner();
      this.store.addAttempt({
        prompt: job.prompt,
        sourceUrl: job.source.previewUrl,
        resultUrl: `data:image/png;base64,${result.image}`,
        model: result.model,
        elapsedMs: result.elapsed_ms,
      });
    } catch (err) {
      if (err instanceof ServiceError && err.status === 503) {
        this.showBanner("no model loaded — register a checkpoint on the service");
      } else if (err instanceof ServiceError) {
        this.showBanner(`colorization failed (${err.status}): ${err.message}`);
      } else {
        this.showBanner("colorization failed: service unreachable");
      }
    }
  }

  private renderQueueNote(active?: string): void {
    const note = this.el<HTMLElement>("queue-note");
    const waiting = this.queue.length;
    if (!active && waiting === 0) {
      note.hidden = true;
      return;
    }
    note.hidden = false;
    note.textContent = active
      ? `colorizing “${active}”…` + (waiting ? ` (${waiting} queued)` : "")
      : `${waiting} request(s) queued`;
  }

  // ---- attempt history and comparison ---------------------------------------

  private renderAttempts(): void {
    const container = this.el<HTMLElement>("attempts");
    container.innerHTML = "";
    for (const attempt of this.store.list()) {
      const card = document.createElement("article");
      card.className = "card";
      card.dataset.attemptId = String(attempt.id);
      const checked = this.store.isSelected(attempt.id) ? "checked" : "";
      card.innerHTML = `
        <div class="pair">
          <img class="card-source" src="${attempt.sourceUrl}" alt="input" />
          <img class="card-result" src="${attempt.resultUrl}" alt="result" />
        </div>
        <p class="prompt"></p>
        <label><input type="checkbox" class="select-box" ${checked} /> compare</label>
        <small>${attempt.elapsedMs.toFixed(0)} ms · model ${attempt.model}</small>
      `;
      (card.querySelector(".prompt") as HTMLElement).textContent = attempt.prompt;
      (card.querySelector(".select-box") as HTMLInputElement).addEventListener("change", () => {
        this.store.toggleSelect(attempt.id);
      });
      container.appendChild(card);
    }
    const compareBtn = this.el<HTMLButtonElement>("compare-btn");
    compareBtn.disabled = !this.store.canCompare();
    compareBtn.textContent = `Compare selected (${this.store.selection().length})`;
    if (!this.store.canCompare()) {
      this.el<HTMLElement>("compare-panel").hidden = true;
    }
  }

  renderCompare(): void {
    if (!this.store.canCompare()) return;
    const selection = this.store.selection().slice(0, MAX_COMPARE);
    if (selection.length < MIN_COMPARE) return;
    const panel = this.el<HTMLElement>("compare-panel");
    const grid = this.el<HTMLElement>("compare-grid");
    grid.innerHTML = "";
    grid.style.gridTemplateColumns = `repeat(${selection.length}, 1fr)`;
    for (const attempt of selection) {
      const cell = document.createElement("figure");
      cell.className = "compare-cell";
      const img = document.createElement("img");
      img.src = attempt.resultUrl;
      img.alt = `result for: ${attempt.prompt}`;
      const caption = document.createElement("figcaption");
      caption.textContent = attempt.prompt;
      cell.append(img, caption);
      grid.appendChild(cell);
    }
    panel.hidden = false;
  }
}

export function mount(root: HTMLElement, baseUrl = ""): App {
  return new App(root, new ColorizeClient(baseUrl));
}
