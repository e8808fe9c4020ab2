/* Keystroke wiring. Decisions ride on bare letters, so anything that looks
like typing is ignored: focused form fields, contenteditable, held
modifiers. */

export interface ShortcutHandlers {
  include(): void;
  exclude(): void;
  maybe(): void;
  next(): void;
  prev(): void;
}

function inEditable(target: EventTarget | null): boolean {
  if (!(target instanceof HTMLElement)) return false;
  if (target.isContentEditable) return true;
  const tag = target.tagName;
  return tag === "INPUT" || tag === "TEXTAREA" || tag === "SELECT";
}

/** Attach the shortcut map to a keydown source; returns an unsubscribe. */
export function bindShortcuts(
  target: EventTarget,
  handlers: ShortcutHandlers,
): () => void {
  function listener(event: Event): void {
    const e = event as KeyboardEvent;
    if (e.metaKey || e.ctrlKey || e.altKey) return;
    if (inEditable(e.target)) return;
    switch (e.key.toLowerCase()) {
      case "i":
        handlers.include();
        break;
      case "e":
        handlers.exclude();
        break;
      case "m":
        handlers.maybe();
        break;
      case "arrowright":
        handlers.next();
        break;
      case "arrowleft":
        handlers.prev();
        break;
      default:
        return;
    }
    e.preventDefault();
  }
  target.addEventListener("keydown", listener);
  return () => target.removeEventListener("keydown", listener);
}
