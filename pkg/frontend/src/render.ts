import type { SessionState } from './session.js';
import type { AspectName } from './types.js';
import { ASPECT_HINTS, ASPECTS, SCALE_ANCHORS } from './types.js';

export interface Handlers {
  onBegin(raterId: string): void;
  onScore(aspect: AspectName, value: number): void;
  onFocusAspect(aspect: AspectName): void;
  onSubmit(): void;
  onRetry(): void;
}

function el<K extends keyof HTMLElementTagNameMap>(
  doc: Document,
  tag: K,
  className?: string,
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = doc.createElement(tag);
  if (className) {
    node.className = className;
  }
  if (text !== undefined) {
    node.textContent = text; // textContent only: task content is never parsed as HTML
  }
  return node;
}

function renderLogin(doc: Document, handlers: Handlers): HTMLElement {
  const panel = el(doc, 'div', 'panel login-panel');
  panel.appendChild(el(doc, 'h1', 'title', 'Comment rating'));
  panel.appendChild(el(doc, 'p', 'hint',
    'Enter your rater id to receive your queue of anonymized comments.'));
  const input = el(doc, 'input', 'rater-input');
  input.id = 'rater-id';
  input.setAttribute('placeholder', 'rater id');
  const button = el(doc, 'button', 'primary', 'Start rating');
  button.id = 'begin';
  button.addEventListener('click', () => handlers.onBegin(input.value));
  input.addEventListener('keydown', (event: KeyboardEvent) => {
    if (event.key === 'Enter') {
      handlers.onBegin(input.value);
    }
  });
  panel.appendChild(input);
  panel.appendChild(button);
  return panel;
}

function renderCode(doc: Document, code: string): HTMLElement {
  const wrapper = el(doc, 'div', 'code-view');
  const pre = el(doc, 'pre', 'code-lines');
  for (const [index, line] of code.split('\n').entries()) {
    const row = el(doc, 'div', 'code-line');
    row.appendChild(el(doc, 'span', 'line-no', String(index + 1)));
    row.appendChild(el(doc, 'span', 'line-text', line));
    pre.appendChild(row);
  }
  wrapper.appendChild(pre);
  return wrapper;
}

function renderAspect(
  doc: Document,
  state: SessionState,
  aspect: AspectName,
  handlers: Handlers,
): HTMLElement {
  const row = el(doc, 'fieldset',
    'aspect' + (state.activeAspect === aspect ? ' active' : ''));
  row.id = `aspect-${aspect}`;
  row.title = ASPECT_HINTS[aspect];
  const legend = el(doc, 'legend', 'aspect-name', aspect);
  legend.title = ASPECT_HINTS[aspect];
  row.appendChild(legend);
  const chosen = state.scores[aspect];
  for (let value = 1; value <= 5; value += 1) {
    const label = `${value} · ${SCALE_ANCHORS[value - 1]}`;
    const button = el(doc, 'button',
      'score' + (chosen === value ? ' chosen' : ''), label);
    button.setAttribute('data-aspect', aspect);
    button.setAttribute('data-value', String(value));
    button.addEventListener('click', () => handlers.onScore(aspect, value));
    row.appendChild(button);
  }
  row.addEventListener('click', () => handlers.onFocusAspect(aspect));
  return row;
}

function renderTask(doc: Document, state: SessionState, handlers: Handlers): HTMLElement {
  const task = state.task!;
  const panel = el(doc, 'div', 'panel task-panel');

  const header = el(doc, 'div', 'task-header');
  header.appendChild(el(doc, 'span', 'slot-label',
    `Comment ${task.blind_slot} of ${task.slot_count}`));
  if (task.is_escalation) {
    header.appendChild(el(doc, 'span', 'escalation-badge', 'tie-break request'));
  }
  header.appendChild(el(doc, 'span', 'session-count',
    `${state.submittedCount} rated this session`));
  panel.appendChild(header);

  panel.appendChild(renderCode(doc, task.code));

  const comment = el(doc, 'blockquote', 'comment-view', task.comment);
  comment.id = 'comment';
  panel.appendChild(comment);

  const scale = el(doc, 'p', 'scale-hint',
    'Score each aspect from 1 (poor) to 5 (excellent); keys 1-5 score the highlighted aspect.');
  panel.appendChild(scale);

  for (const aspect of ASPECTS) {
    panel.appendChild(renderAspect(doc, state, aspect, handlers));
  }

  const submit = el(doc, 'button', 'primary submit', 'Submit rating');
  submit.id = 'submit';
  const ready = ASPECTS.every((aspect) => typeof state.scores[aspect] === 'number');
  if (!ready || state.phase === 'submitting') {
    submit.setAttribute('disabled', 'disabled');
  }
  submit.addEventListener('click', () => handlers.onSubmit());
  panel.appendChild(submit);
  return panel;
}

function renderDone(doc: Document, state: SessionState): HTMLElement {
  const panel = el(doc, 'div', 'panel done-panel');
  panel.appendChild(el(doc, 'h1', 'title', 'All done'));
  panel.appendChild(el(doc, 'p', 'done-message',
    `Your queue is empty. You submitted ${state.submittedCount} rating(s) this session.`));
  if (state.progress) {
    const p = state.progress;
    panel.appendChild(el(doc, 'p', 'progress-totals',
      `Study progress: ${p.rated} rated, ${p.open} open, ` +
      `${p.escalated} escalated, ${p.resolved} resolved.`));
  }
  return panel;
}

function renderError(doc: Document, state: SessionState, handlers: Handlers): HTMLElement {
  const banner = el(doc, 'div', 'banner error-banner');
  banner.appendChild(el(doc, 'span', 'error-text',
    `Request failed: ${state.errorMessage ?? 'unknown error'}. Nothing was lost.`));
  const retry = el(doc, 'button', 'retry', 'Retry');
  retry.id = 'retry';
  retry.addEventListener('click', () => handlers.onRetry());
  banner.appendChild(retry);
  return banner;
}

/** Rebuild the app subtree for the current state. */
export function render(root: HTMLElement, state: SessionState, handlers: Handlers): void {
  const doc = root.ownerDocument;
  root.textContent = '';
  switch (state.phase) {
    case 'login':
      root.appendChild(renderLogin(doc, handlers));
      break;
    case 'loading':
      root.appendChild(el(doc, 'div', 'panel', 'Fetching your next task…'));
      break;
    case 'rating':
    case 'submitting':
      root.appendChild(renderTask(doc, state, handlers));
      break;
    case 'error':
      root.appendChild(renderError(doc, state, handlers));
      break;
    case 'done':
      root.appendChild(renderDone(doc, state));
      break;
  }
}
