import { tokenize } from './tokens.js';

/** What the /embed endpoint needs from a model backend. */
export interface EmbedModel {
  readonly name: string;
  readonly dimension: number;
  readonly pooling: string;
  isReady(): boolean;
  embed(texts: string[]): number[][];
}

/**
 * Deterministic feature-hashing embedder: each token lands in a bucket
 * chosen by a 32-bit FNV-1a hash of its bytes. Vectors are returned
 * unnormalized; the retrieval client normalizes on its side. Serves as
 * the reference backend; neural checkpoints can replace it behind the
 * same interface.
 */
export class HashingEmbedder implements EmbedModel {
  readonly name: string;
  readonly dimension: number;
  readonly pooling: 'mean' | 'sum';

  constructor(dimension: number, pooling: 'mean' | 'sum') {
    this.dimension = dimension;
    this.pooling = pooling;
    this.name = `hash-bow-${dimension}-${pooling}`;
  }

  isReady(): boolean {
    return true;
  }

  embed(texts: string[]): number[][] {
    return texts.map((text) => this.embedOne(text));
  }

  private embedOne(text: string): number[] {
    const vector = new Array<number>(this.dimension).fill(0);
    const tokens = tokenize(text);
    for (const token of tokens) {
      vector[fnv1a(token) % this.dimension] += 1;
    }
    if (this.pooling === 'mean' && tokens.length > 0) {
      for (let i = 0; i < vector.length; i += 1) {
        vector[i] /= tokens.length;
      }
    }
    return vector;
  }
}

function fnv1a(token: string): number {
  const bytes = Buffer.from(token, 'utf-8');
  let hash = 0x811c9dc5;
  for (const byte of bytes) {
    hash ^= byte;
    hash = Math.imul(hash, 0x01000193) >>> 0;
  }
  return hash >>> 0;
}
