/**
 * The annotator screen: one review item at a time.
 *
 * Flow: register -> fetch next item -> (open documents, pick a choice,
 * optionally add a rationale) -> submit -> next item -> ... -> completion
 * screen. Choice controls stay disabled until the documents pane has been
 * opened at least once, so nobody can judge blind. Submissions advance the
 * progress bar optimistically and reconcile against the server ack; failed
 * posts queue for retry behind a visible pending badge.
 */

import { ApiError } from "./api.js";
import type { Block, Choice, DocumentRecord, ItemView, ReviewClient } from "./api.js";
import {
  applyItem,
  applyRegistration,
  confirmEntry,
  initialState,
  progressPercent,
  recordOptimistic,
} from "./state.js";
import type { JudgedEntry, SessionState } from "./state.js";

const AB_LABELS: Record<string, string> = {
  A_correct: "Answer A is correct",
  B_correct: "Answer B is correct",
  both: "Both answers are correct",
  neither: "Neither answer is correct",
};

const SCORE_LABELS: Record<string, string> = {
  "1": "Valid",
  "0": "Invalid",
};

interface PendingSubmission {
  itemId: string;
  choice: Choice;
  rationale?: string;
  entry: JudgedEntry;
}

export class ReviewApp {
  readonly state: SessionState = initialState();
  private docsOpened = false;
  private selected: Choice | null = null;
  private submitting = false;
  private retryQueue: PendingSubmission[] = [];
  private retryTimer: ReturnType<typeof setTimeout> | null = null;

  constructor(
    private root: HTMLElement,
    private api: ReviewClient,
    private retryDelayMs = 1500,
  ) {}

  async start(name?: string): Promise<void> {
    const registration = await this.api.register(name);
    applyRegistration(this.state, registration.token, registration.annotator_id, registration.total_items);
    await this.loadNext();
  }

  /** Pick an existing session back up (page refresh): the server's progress
   * is the source of truth and arrives with the next item view. */
  async resume(token: string): Promise<void> {
    applyRegistration(this.state, token, null, 0);
    await this.loadNext();
  }

  async loadNext(): Promise<void> {
    try {
      const view = await this.api.nextItem();
      applyItem(this.state, view);
      this.docsOpened = false;
      this.selected = null;
      this.render();
    } catch (err) {
      this.renderFetchError(err);
    }
  }

  // -- rendering ------------------------------------------------------------

  render(): void {
    this.root.textContent = "";
    this.root.append(this.header());
    if (this.state.done) {
      this.root.append(this.completionScreen());
      return;
    }
    const view = this.state.current;
    if (view === null) {
      return;
    }
    this.root.append(this.itemScreen(view));
  }

  private header(): HTMLElement {
    const header = el("header", {});
    const progress = el("div", { "data-testid": "progress" });
    progress.textContent = `Progress: ${this.state.judged}/${this.state.total} (${progressPercent(this.state)}%)`;
    header.append(progress);
    const pending = el("span", { "data-testid": "pending-badge" });
    pending.className = "pending-badge";
    if (this.state.pending > 0) {
      pending.textContent = `saving ${this.state.pending}…`;
    } else {
      pending.hidden = true;
    }
    header.append(pending);
    return header;
  }

  private completionScreen(): HTMLElement {
    const panel = el("section", { "data-testid": "completion" });
    const heading = el("h2", {});
    heading.textContent = "All items reviewed";
    const note = el("p", {});
    note.textContent = `Progress: 100% (${this.state.total}/${this.state.total}). Thank you!`;
    panel.append(heading, note, this.historyView());
    return panel;
  }

  private itemScreen(view: ItemView): HTMLElement {
    const panel = el("section", { "data-testid": "item" });

    const question = el("h2", { "data-testid": "question" });
    question.textContent = view.question ?? "";
    panel.append(question);

    panel.append(this.documentsPane(view.documents ?? []));
    panel.append(this.answersPane(view));
    panel.append(this.choicesPane(view));

    const rationale = el("textarea", {
      "data-testid": "rationale",
      placeholder: "Optional: why did you choose this?",
    }) as HTMLTextAreaElement;
    panel.append(rationale);

    const submit = el("button", { "data-testid": "submit" }) as HTMLButtonElement;
    submit.textContent = "Submit judgment";
    submit.disabled = true;
    submit.addEventListener("click", () => {
      void this.submit(rationale.value || undefined);
    });
    panel.append(submit);

    panel.append(this.historyView());
    return panel;
  }

  private documentsPane(documents: DocumentRecord[]): HTMLElement {
    const pane = el("div", { "data-testid": "documents-pane" });
    const toggle = el("button", { "data-testid": "open-documents" }) as HTMLButtonElement;
    toggle.textContent = "View source documents";
    const content = el("div", { "data-testid": "documents" });
    content.hidden = true;
    for (const doc of documents) {
      content.append(this.documentView(doc));
    }
    toggle.addEventListener("click", () => {
      content.hidden = false;
      this.docsOpened = true;
      this.updateChoiceEnablement();
    });
    pane.append(toggle, content);
    return pane;
  }

  private documentView(doc: DocumentRecord): HTMLElement {
    const article = el("article", { "data-doc-id": doc.id });
    const title = el("h3", {});
    title.textContent = doc.title;
    article.append(title);
    for (const block of doc.blocks ?? []) {
      article.append(this.blockView(block));
    }
    if (!doc.blocks && doc.text) {
      const body = el("p", {});
      body.textContent = doc.text;
      article.append(body);
    }
    return article;
  }

  private blockView(block: Block): HTMLElement {
    if (block.kind === "text") {
      const p = el("p", {});
      p.textContent = block.text;
      return p;
    }
    if (block.kind === "image") {
      const figure = el("figure", {});
      const img = el("img", { src: block.uri, alt: block.alt ?? "" });
      const caption = el("figcaption", {});
      caption.textContent = block.caption ?? block.alt ?? "";
      figure.append(img, caption);
      return figure;
    }
    const table = el("table", {});
    block.rows.forEach((row, index) => {
      const tr = el("tr", {});
      for (const cell of row) {
        const td = el(block.header && index === 0 ? "th" : "td", {});
        td.textContent = cell;
        tr.append(td);
      }
      table.append(tr);
    });
    return table;
  }

  private answersPane(view: ItemView): HTMLElement {
    const pane = el("div", { "data-testid": "answers" });
    if (view.mode === "AB") {
      const a = el("div", { "data-testid": "answer-a" });
      a.textContent = `Answer A: ${view.answer_a ?? ""}`;
      const b = el("div", { "data-testid": "answer-b" });
      b.textContent = `Answer B: ${view.answer_b ?? ""}`;
      pane.append(a, b);
    } else {
      const only = el("div", { "data-testid": "answer" });
      only.textContent = `Answer: ${view.answer ?? ""}`;
      pane.append(only);
    }
    return pane;
  }

  private choicesPane(view: ItemView): HTMLElement {
    const pane = el("div", { "data-testid": "choices", role: "radiogroup" });
    const labels = view.mode === "AB" ? AB_LABELS : SCORE_LABELS;
    for (const choice of view.choices ?? []) {
      const button = el("button", {
        "data-testid": `choice-${choice}`,
        "data-choice": String(choice),
      }) as HTMLButtonElement;
      button.textContent = labels[String(choice)] ?? String(choice);
      button.disabled = !this.docsOpened;
      button.addEventListener("click", () => {
        this.selected = choice;
        for (const sibling of Array.from(pane.children)) {
          sibling.classList.remove("selected");
        }
        button.classList.add("selected");
        this.updateChoiceEnablement();
      });
      pane.append(button);
    }
    return pane;
  }

  private historyView(): HTMLElement {
    const list = el("ul", { "data-testid": "history" });
    for (const entry of this.state.history) {
      const li = el("li", { "data-confirmed": String(entry.confirmed) });
      li.textContent = `${entry.itemId}: ${entry.choice}${entry.confirmed ? "" : " (pending)"}`;
      list.append(li);
    }
    return list;
  }

  private updateChoiceEnablement(): void {
    for (const button of this.root.querySelectorAll<HTMLButtonElement>("[data-choice]")) {
      button.disabled = !this.docsOpened;
    }
    const submit = this.root.querySelector<HTMLButtonElement>('[data-testid="submit"]');
    if (submit) {
      submit.disabled = this.selected === null || this.submitting;
    }
  }

  private renderFetchError(err: unknown): void {
    this.root.textContent = "";
    this.root.append(this.header());
    const banner = el("div", { "data-testid": "retry-banner" });
    banner.textContent = `Could not reach the review service (${String(err)}).`;
    const retry = el("button", { "data-testid": "retry" }) as HTMLButtonElement;
    retry.textContent = "Retry";
    retry.addEventListener("click", () => {
      void this.loadNext();
    });
    banner.append(retry);
    this.root.append(banner);
  }

  // -- submission -------------------------------------------------------------

  async submit(rationale?: string): Promise<void> {
    const view = this.state.current;
    if (view === null || view.item_id === undefined || this.selected === null || this.submitting) {
      return;
    }
    this.submitting = true;
    const choice = this.selected;
    const entry = recordOptimistic(this.state, view.item_id, choice, rationale);
    this.render(); // optimistic: progress bumped, pending badge visible
    try {
      const ack = await this.api.submitJudgment(view.item_id, choice, rationale);
      confirmEntry(this.state, entry, ack.progress);
    } catch (err) {
      if (err instanceof ApiError && err.status > 0) {
        // server saw and refused it (e.g. already judged): fetch server truth
        confirmEntry(this.state, entry, { judged: this.state.judged, total: this.state.total });
      } else {
        // network failure: keep it queued with a visible pending badge
        this.retryQueue.push({ itemId: view.item_id, choice, rationale, entry });
        this.scheduleRetry();
      }
    } finally {
      this.submitting = false;
    }
    await this.loadNext();
  }

  private scheduleRetry(): void {
    if (this.retryTimer !== null) {
      return;
    }
    this.retryTimer = setTimeout(() => {
      this.retryTimer = null;
      void this.flushRetries();
    }, this.retryDelayMs);
  }

  async flushRetries(): Promise<void> {
    const queue = this.retryQueue;
    this.retryQueue = [];
    for (const pending of queue) {
      try {
        const ack = await this.api.submitJudgment(pending.itemId, pending.choice, pending.rationale);
        confirmEntry(this.state, pending.entry, ack.progress);
      } catch (err) {
        if (err instanceof ApiError && err.status > 0) {
          confirmEntry(this.state, pending.entry, { judged: this.state.judged, total: this.state.total });
        } else {
          this.retryQueue.push(pending);
        }
      }
    }
    if (this.retryQueue.length > 0) {
      this.scheduleRetry();
    }
    this.render();
  }

  get pendingRetries(): number {
    return this.retryQueue.length;
  }
}

function el(tag: string, attrs: Record<string, string>): HTMLElement {
  const node = document.createElement(tag);
  for (const [key, value] of Object.entries(attrs)) {
    node.setAttribute(key, value);
  }
  return node;
}
