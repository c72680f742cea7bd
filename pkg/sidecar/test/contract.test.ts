import assert from 'node:assert/strict';
import { AddressInfo } from 'node:net';
import { after, before, describe, it } from 'node:test';

import { HashingEmbedder, EmbedModel } from '../src/embedder.js';
import { ExemplarCopyGenerator } from '../src/generator.js';
import { buildServer } from '../src/server.js';

function listen(server: ReturnType<typeof buildServer>): Promise<string> {
  return new Promise((resolve) => {
    server.listen(0, '127.0.0.1', () => {
      const { port } = server.address() as AddressInfo;
      resolve(`http://127.0.0.1:${port}`);
    });
  });
}

async function postJson(url: string, body: unknown): Promise<{ status: number; json: any }> {
  const resp = await fetch(url, {
    method: 'POST',
    headers: { 'Content-Type': 'application/json' },
    body: typeof body === 'string' ? body : JSON.stringify(body),
  });
  return { status: resp.status, json: await resp.json() };
}

describe('sidecar contract', () => {
  const server = buildServer({
    embedModel: new HashingEmbedder(32, 'mean'),
    genModel: new ExemplarCopyGenerator(64),
  });
  let base = '';

  before(async () => {
    base = await listen(server);
  });
  after(() => server.close());

  it('health advertises the embedding dimension', async () => {
    const resp = await fetch(`${base}/health`);
    assert.equal(resp.status, 200);
    const health = await resp.json();
    assert.equal(health.status, 'ok');
    assert.equal(health.dimension, 32);
    assert.ok(health.embed_model);
    assert.ok(health.gen_model);
    assert.ok(health.pooling);
  });

  it('embed returns one vector per text with the advertised dimension', async () => {
    const { status, json } = await postJson(`${base}/embed`, { texts: ['a b', 'c', 'a b'] });
    assert.equal(status, 200);
    assert.equal(json.vectors.length, 3);
    for (const vector of json.vectors) {
      assert.equal(vector.length, 32);
    }
    assert.deepEqual(json.vectors[0], json.vectors[2]);
  });

  it('embed of an empty batch is an empty batch', async () => {
    const { status, json } = await postJson(`${base}/embed`, { texts: [] });
    assert.equal(status, 200);
    assert.deepEqual(json.vectors, []);
  });

  it('embed is deterministic across calls', async () => {
    const first = await postJson(`${base}/embed`, { texts: ['void f() { g(); }'] });
    const second = await postJson(`${base}/embed`, { texts: ['void f() { g(); }'] });
    assert.deepEqual(first.json.vectors, second.json.vectors);
  });

  it('embed rejects malformed bodies with 400', async () => {
    const notJson = await postJson(`${base}/embed`, '{nope');
    assert.equal(notJson.status, 400);
    const wrongField = await postJson(`${base}/embed`, { texts: 'not a list' });
    assert.equal(wrongField.status, 400);
  });

  it('generate preserves order and cardinality', async () => {
    const { status, json } = await postJson(`${base}/generate`, {
      prompts: ['first words here', 'second prompt', 'third'],
      max_new_tokens: 16,
      decode_hint: 'beam=10',
    });
    assert.equal(status, 200);
    assert.equal(json.outputs.length, 3);
    assert.ok(json.outputs[0].startsWith('first'));
    assert.ok(json.outputs[1].startsWith('second'));
  });

  it('generate is deterministic for a repeated prompt', async () => {
    const body = { prompts: ['same prompt twice'], max_new_tokens: 8, decode_hint: '' };
    const first = await postJson(`${base}/generate`, body);
    const second = await postJson(`${base}/generate`, body);
    assert.deepEqual(first.json.outputs, second.json.outputs);
  });

  it('generate honors max_new_tokens = 1', async () => {
    const { json } = await postJson(`${base}/generate`, {
      prompts: ['several words in here'],
      max_new_tokens: 1,
    });
    assert.equal(json.outputs.length, 1);
    assert.ok(json.outputs[0].split(/\s+/).filter(Boolean).length <= 1);
  });

  it('generate copies the first exemplar comment from an augmented prompt', async () => {
    const { json } = await postJson(`${base}/generate`, {
      prompts: ['query code [nsep] use a logger here [csep] exemplar code [nsep] second'],
      max_new_tokens: 32,
    });
    assert.equal(json.outputs[0], 'use a logger here');
  });

  it('generate rejects prompts beyond the context limit with 422 naming the limit', async () => {
    const oversized = Array.from({ length: 100 }, (_, i) => `t${i}`).join(' ');
    const { status, json } = await postJson(`${base}/generate`, {
      prompts: [oversized],
      max_new_tokens: 4,
    });
    assert.equal(status, 422);
    assert.equal(json.context_limit, 64);
    assert.match(json.error, /64/);
  });
});

describe('embedding-only deployment', () => {
  const server = buildServer({
    embedModel: new HashingEmbedder(8, 'sum'),
    genModel: null,
  });
  let base = '';

  before(async () => {
    base = await listen(server);
  });
  after(() => server.close());

  it('health reports gen_model null', async () => {
    const health = await (await fetch(`${base}/health`)).json();
    assert.equal(health.status, 'ok');
    assert.equal(health.gen_model, null);
  });

  it('generate answers 503', async () => {
    const { status } = await postJson(`${base}/generate`, { prompts: ['x'] });
    assert.equal(status, 503);
  });
});

describe('model still loading', () => {
  class NotReady implements EmbedModel {
    readonly name = 'loading';
    readonly dimension = 4;
    readonly pooling = 'mean';
    isReady(): boolean {
      return false;
    }
    embed(): number[][] {
      throw new Error('not ready');
    }
  }

  const server = buildServer({ embedModel: new NotReady(), genModel: null });
  let base = '';

  before(async () => {
    base = await listen(server);
  });
  after(() => server.close());

  it('health answers 503 during load', async () => {
    const resp = await fetch(`${base}/health`);
    assert.equal(resp.status, 503);
  });

  it('embed answers 503 during load', async () => {
    const { status } = await postJson(`${base}/embed`, { texts: ['x'] });
    assert.equal(status, 503);
  });
});
