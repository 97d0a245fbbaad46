/** Keyboard capture: single keypress -> observation token. */

export type KeyMap = Record<string, string>;

export const DEFAULT_KEYMAP: KeyMap = {
  r: "RED",
  b: "BLUE",
  p: "PAIN",
  n: "NO_PAIN",
  w: "WIN",
  l: "LOSE",
};

export interface KeyEventLike {
  key: string;
}

export interface KeyTargetLike {
  addEventListener(type: "keydown", listener: (event: KeyEventLike) => void): void;
  removeEventListener(type: "keydown", listener: (event: KeyEventLike) => void): void;
}

/**
 * Attach the keymap to a target; returns the detach function. Keys outside
 * the map are ignored (keyboard-only input during trials, nothing else).
 */
export function attachKeyboard(
  target: KeyTargetLike,
  keymap: KeyMap,
  onToken: (token: string) => void
): () => void {
  const listener = (event: KeyEventLike) => {
    const token = keymap[event.key.toLowerCase()];
    if (token) {
      onToken(token);
    }
  };
  target.addEventListener("keydown", listener);
  return () => target.removeEventListener("keydown", listener);
}
