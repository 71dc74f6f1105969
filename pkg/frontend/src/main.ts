import { ApiClient, ApiError } from "./api.js";
import { bindKeys, KEY_BINDINGS } from "./keyboard.js";
import { CardLoop, progressConsistent, progressRows } from "./state.js";
import { HARD_SKIP, LABEL_CLASSES, LABEL_DISPLAY, type Role, type Session } from "./types.js";

/** DOM wiring. Views: #/label (card loop), #/disputes (adjudication queue),
 * #/progress (polled dashboard). Connection settings persist in
 * localStorage; everything else is re-derived from the server on render. */

const POLL_MS = 3000;

const root = document.getElementById("app") as HTMLElement;

function loadSession(): Session | null {
  const raw = localStorage.getItem("annotation-session");
  if (!raw) return null;
  try {
    return JSON.parse(raw) as Session;
  } catch {
    return null;
  }
}

function saveSession(session: Session): void {
  localStorage.setItem("annotation-session", JSON.stringify(session));
}

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  attrs: Record<string, string> = {},
  ...children: Array<Node | string>
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  for (const [k, v] of Object.entries(attrs)) {
    if (k === "class") node.className = v;
    else node.setAttribute(k, v);
  }
  node.append(...children);
  return node;
}

function nav(session: Session): HTMLElement {
  const links: Array<[string, string]> = [
    ["#/label", "Label"],
    ["#/disputes", "Disputes"],
    ["#/progress", "Progress"],
  ];
  const bar = el("nav", { class: "nav" });
  for (const [href, text] of links) {
    bar.append(el("a", { href, class: location.hash === href ? "active" : "" }, text));
  }
  bar.append(
    el("span", { class: "session-tag" }, `${session.annotator} (${session.role})`),
    el("button", { class: "link", id: "change-session" }, "change"),
  );
  bar.querySelector("#change-session")!.addEventListener("click", () => {
    localStorage.removeItem("annotation-session");
    render();
  });
  return bar;
}

// ---------------------------------------------------------------------------
// Session form
// ---------------------------------------------------------------------------

function sessionView(): void {
  const form = el(
    "form",
    { class: "session-form" },
    el("h1", {}, "Annotation console"),
    field("Service URL", "url", "http://127.0.0.1:8787"),
    field("Annotator id", "annotator", ""),
    el(
      "label",
      {},
      "Role",
      el(
        "select",
        { name: "role" },
        el("option", { value: "annotator" }, "annotator"),
        el("option", { value: "adjudicator" }, "adjudicator"),
      ),
    ),
    field("Token (optional)", "token", ""),
    el("button", { type: "submit" }, "Start"),
  );
  form.addEventListener("submit", (ev) => {
    ev.preventDefault();
    const data = new FormData(form);
    const session: Session = {
      baseUrl: String(data.get("url") || "").trim(),
      annotator: String(data.get("annotator") || "").trim(),
      role: (String(data.get("role")) as Role) || "annotator",
      token: String(data.get("token") || "").trim() || undefined,
    };
    if (!session.baseUrl || !session.annotator) return;
    saveSession(session);
    location.hash = "#/label";
    render();
  });
  root.replaceChildren(form);

  function field(labelText: string, name: string, value: string): HTMLElement {
    return el("label", {}, labelText, el("input", { name, value }));
  }
}

// ---------------------------------------------------------------------------
// Labeling view
// ---------------------------------------------------------------------------

let detachKeys: (() => void) | null = null;
let activeLoop: CardLoop | null = null;

function labelingView(session: Session): void {
  const api = new ApiClient(session);
  const loop = new CardLoop(api);
  activeLoop = loop;
  loop.onChange(() => {
    if (activeLoop === loop) paint();
  });

  detachKeys?.();
  detachKeys = bindKeys(document, (label) => void loop.submit(label));

  function paint(): void {
    const container = el("div", { class: "labeling" });
    if (loop.toast) {
      const toast = el("div", { class: "toast" }, loop.toast, el("button", { class: "link" }, "x"));
      toast.querySelector("button")!.addEventListener("click", () => {
        loop.clearToast();
        paint();
      });
      container.append(toast);
    }
    const state = loop.state;
    if (state.kind === "loading") {
      container.append(el("p", { class: "muted" }, "Fetching next sentence..."));
    } else if (state.kind === "complete") {
      container.append(
        el("div", { class: "complete" }, el("h2", {}, "Pool complete"),
          el("p", {}, "No sentences left for you. Thank you.")),
      );
    } else if (state.kind === "failed") {
      const banner = el(
        "div",
        { class: "error-banner" },
        el("p", {}, `Request failed: ${state.message}`),
        el("button", {}, "Retry"),
      );
      banner.querySelector("button")!.addEventListener("click", () => void loop.retry());
      container.append(banner);
    } else {
      const card = state.card;
      container.append(
        el(
          "div",
          { class: "card" },
          el("div", { class: "provenance" }, `${card.firm_id} · ${card.year} · ${card.remaining} remaining`),
          el("p", { class: "sentence" }, card.text),
        ),
      );
      const buttons = el("div", { class: "label-buttons" });
      for (const binding of KEY_BINDINGS) {
        const btn = el(
          "button",
          { class: binding.label === HARD_SKIP ? "label-btn hard" : "label-btn" },
          el("span", { class: "key" }, binding.key),
          binding.display,
        );
        btn.addEventListener("click", () => void loop.submit(binding.label));
        buttons.append(btn);
      }
      container.append(buttons);
    }
    root.replaceChildren(nav(session), container);
  }

  paint();
  void loop.start();
}

// ---------------------------------------------------------------------------
// Dispute view
// ---------------------------------------------------------------------------

function disputesView(session: Session): void {
  if (session.role !== "adjudicator") {
    root.replaceChildren(
      nav(session),
      el("div", { class: "role-error" },
        el("h2", {}, "Adjudicator role required"),
        el("p", {}, "Disputes can only be resolved from an adjudicator session.")),
    );
    return;
  }
  const api = new ApiClient(session);

  async function paint(): Promise<void> {
    let disputes;
    try {
      disputes = await api.disputes();
    } catch (err) {
      const message = err instanceof ApiError && err.status === 401
        ? "This token is not authorized to adjudicate."
        : String(err);
      root.replaceChildren(nav(session), el("div", { class: "role-error" }, el("p", {}, message)));
      return;
    }
    const list = el("div", { class: "disputes" }, el("h2", {}, `Disputes (${disputes.length})`));
    if (!disputes.length) {
      list.append(el("p", { class: "muted" }, "Nothing waiting for adjudication."));
    }
    for (const d of disputes) {
      const select = el("select", {});
      for (const cls of LABEL_CLASSES) {
        select.append(el("option", { value: cls }, LABEL_DISPLAY[cls]));
      }
      const resolve = el("button", {}, "Resolve");
      const exclude = el("button", { class: "hard" }, "Exclude");
      const row = el(
        "div",
        { class: "dispute" },
        el("p", { class: "sentence" }, d.text),
        el(
          "div",
          { class: "labels" },
          el("span", { class: "pill" }, LABEL_DISPLAY[d.label_a] ?? d.label_a),
          " vs ",
          el("span", { class: "pill" }, LABEL_DISPLAY[d.label_b] ?? d.label_b),
        ),
        el("div", { class: "controls" }, select, resolve, exclude),
      );
      resolve.addEventListener("click", () => {
        void api.adjudicate(d.sentence_id, select.value).then(paint);
      });
      exclude.addEventListener("click", () => {
        void api.adjudicate(d.sentence_id, HARD_SKIP).then(paint);
      });
      list.append(row);
    }
    root.replaceChildren(nav(session), list);
  }

  void paint();
}

// ---------------------------------------------------------------------------
// Progress dashboard
// ---------------------------------------------------------------------------

let pollHandle: ReturnType<typeof setInterval> | null = null;

function progressView(session: Session): void {
  const api = new ApiClient(session);

  async function paint(): Promise<void> {
    try {
      const progress = await api.progress();
      const table = el("table", { class: "progress" });
      for (const [name, value] of progressRows(progress)) {
        table.append(el("tr", {}, el("td", {}, name), el("td", { class: "num" }, value)));
      }
      const note = progressConsistent(progress)
        ? el("p", { class: "muted" }, `Live view, refreshed every ${POLL_MS / 1000}s.`)
        : el("p", { class: "error-banner" }, "Inconsistent counts returned by the server.");
      root.replaceChildren(nav(session), el("div", { class: "dashboard" }, table, note));
    } catch (err) {
      root.replaceChildren(nav(session), el("p", { class: "error-banner" }, String(err)));
    }
  }

  void paint();
  pollHandle = setInterval(() => void paint(), POLL_MS);
}

// ---------------------------------------------------------------------------
// Router
// ---------------------------------------------------------------------------

function render(): void {
  if (pollHandle !== null) {
    clearInterval(pollHandle);
    pollHandle = null;
  }
  detachKeys?.();
  detachKeys = null;
  activeLoop = null;
  const session = loadSession();
  if (!session) {
    sessionView();
    return;
  }
  switch (location.hash) {
    case "#/disputes":
      disputesView(session);
      break;
    case "#/progress":
      progressView(session);
      break;
    default:
      labelingView(session);
  }
}

window.addEventListener("hashchange", render);
render();
