// Session state: an append-only history of colorization attempts plus the
// comparison selection.  History lives only in this tab; reloading starts a
// fresh exploration session.

export interface SessionAttempt {
  id: number;
  prompt: string;
  /** data URL of the uploaded source preview */
  sourceUrl: string;
  /** data URL of the server result, byte-faithful to the response */
  resultUrl: string;
  model: string;
  elapsedMs: number;
  timestamp: number;
}

export const MIN_COMPARE = 2;
export const MAX_COMPARE = 4;

type Listener = () => void;

export class SessionStore {
  private attempts: SessionAttempt[] = [];
  private selected = new Set<number>();
  private listeners: Listener[] = [];
  private nextId = 1;

  subscribe(listener: Listener): void {
    this.listeners.push(listener);
  }

  private emit(): void {
    for (const listener of this.listeners) listener();
  }

  addAttempt(attempt: Omit<SessionAttempt, "id" | "timestamp">): SessionAttempt {
    const full: SessionAttempt = { ...attempt, id: this.nextId++, timestamp: Date.now() };
    this.attempts.push(full);
    this.emit();
    return full;
  }

  /** Attempts in submission order; the array is never reordered or pruned. */
  list(): readonly SessionAttempt[] {
    return this.attempts;
  }

  toggleSelect(id: number): void {
    if (this.selected.has(id)) {
      this.selected.delete(id);
    } else if (this.selected.size < MAX_COMPARE) {
      this.selected.add(id);
    }
    this.emit();
  }

  isSelected(id: number): boolean {
    return this.selected.has(id);
  }

  selection(): SessionAttempt[] {
    return this.attempts.filter((a) => this.selected.has(a.id));
  }

  canCompare(): boolean {
    return this.selected.size >= MIN_COMPARE && this.selected.size <= MAX_COMPARE;
  }
}
