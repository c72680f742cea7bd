import { tokenize } from './tokens.js';

export interface GenerateModel {
  readonly name: string;
  readonly contextLimit: number;
  isReady(): boolean;
  generate(prompts: string[], maxNewTokens: number, decodeHint: string): string[];
}

const NSEP = '[nsep]';
const CSEP = '[csep]';

/**
 * Deterministic rule-based generator: when the prompt carries retrieved
 * exemplars it copies the first exemplar comment, otherwise it echoes
 * the query. Output is truncated to maxNewTokens of the model's own
 * tokens. decodeHint is accepted and ignored (greedy-equivalent).
 */
export class ExemplarCopyGenerator implements GenerateModel {
  readonly name = 'exemplar-copy';
  readonly contextLimit: number;

  constructor(contextLimit: number) {
    this.contextLimit = contextLimit;
  }

  isReady(): boolean {
    return true;
  }

  generate(prompts: string[], maxNewTokens: number, _decodeHint: string): string[] {
    return prompts.map((prompt) => {
      const base = firstExemplarSegment(prompt) ?? prompt;
      return tokenize(base).slice(0, maxNewTokens).join(' ');
    });
  }
}

function firstExemplarSegment(prompt: string): string | null {
  const start = prompt.indexOf(NSEP);
  if (start < 0) return null;
  const rest = prompt.slice(start + NSEP.length);
  const stops = [rest.indexOf(CSEP), rest.indexOf(NSEP)].filter((i) => i >= 0);
  const end = stops.length > 0 ? Math.min(...stops) : rest.length;
  return rest.slice(0, end).trim();
}
