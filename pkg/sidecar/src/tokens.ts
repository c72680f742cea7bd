const TOKEN_RE = /[\p{L}\p{N}_]+|[^\p{L}\p{N}_\s]/gu;

/** Identifier runs stay whole; any other non-space character is its own token. */
export function tokenize(text: string): string[] {
  return text.normalize('NFC').match(TOKEN_RE) ?? [];
}

export function countTokens(text: string): number {
  return tokenize(text).length;
}
