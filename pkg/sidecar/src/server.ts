import { createServer, IncomingMessage, Server, ServerResponse } from 'node:http';

import { EmbedModel } from './embedder.js';
import { GenerateModel } from './generator.js';
import { countTokens } from './tokens.js';

export interface SidecarModels {
  embedModel: EmbedModel | null;
  genModel: GenerateModel | null;
}

interface JsonBody {
  [key: string]: unknown;
}

function send(res: ServerResponse, status: number, payload: unknown): void {
  const body = JSON.stringify(payload);
  res.writeHead(status, {
    'Content-Type': 'application/json',
    'Content-Length': Buffer.byteLength(body),
  });
  res.end(body);
}

async function readJson(req: IncomingMessage): Promise<JsonBody> {
  const chunks: Buffer[] = [];
  for await (const chunk of req) {
    chunks.push(chunk as Buffer);
  }
  const raw = Buffer.concat(chunks).toString('utf-8');
  const parsed: unknown = JSON.parse(raw === '' ? '{}' : raw);
  if (typeof parsed !== 'object' || parsed === null || Array.isArray(parsed)) {
    throw new SyntaxError('body must be a JSON object');
  }
  return parsed as JsonBody;
}

function isStringArray(value: unknown): value is string[] {
  return Array.isArray(value) && value.every((item) => typeof item === 'string');
}

export function buildServer(models: SidecarModels): Server {
  const { embedModel, genModel } = models;

  return createServer(async (req, res) => {
    try {
      if (req.method === 'GET' && req.url === '/health') {
        if (!embedModel || !embedModel.isReady()) {
          send(res, 503, { status: 'loading' });
          return;
        }
        send(res, 200, {
          status: 'ok',
          embed_model: embedModel.name,
          gen_model: genModel && genModel.isReady() ? genModel.name : null,
          dimension: embedModel.dimension,
          pooling: embedModel.pooling,
        });
        return;
      }

      if (req.method === 'POST' && req.url === '/embed') {
        if (!embedModel || !embedModel.isReady()) {
          send(res, 503, { error: 'embedding model not ready' });
          return;
        }
        let body: JsonBody;
        try {
          body = await readJson(req);
        } catch {
          send(res, 400, { error: 'malformed JSON body' });
          return;
        }
        if (!isStringArray(body.texts)) {
          send(res, 400, { error: 'body must carry "texts": string[]' });
          return;
        }
        send(res, 200, { vectors: embedModel.embed(body.texts), model: embedModel.name });
        return;
      }

      if (req.method === 'POST' && req.url === '/generate') {
        if (!genModel || !genModel.isReady()) {
          send(res, 503, { error: 'generation model not ready' });
          return;
        }
        let body: JsonBody;
        try {
          body = await readJson(req);
        } catch {
          send(res, 400, { error: 'malformed JSON body' });
          return;
        }
        if (!isStringArray(body.prompts)) {
          send(res, 400, { error: 'body must carry "prompts": string[]' });
          return;
        }
        const maxNewTokens =
          body.max_new_tokens === undefined ? 128 : Number(body.max_new_tokens);
        if (!Number.isInteger(maxNewTokens) || maxNewTokens < 1) {
          send(res, 400, { error: 'max_new_tokens must be a positive integer' });
          return;
        }
        const decodeHint = typeof body.decode_hint === 'string' ? body.decode_hint : '';
        for (const prompt of body.prompts) {
          const length = countTokens(prompt);
          if (length > genModel.contextLimit) {
            send(res, 422, {
              error: `prompt has ${length} tokens, exceeding the model context limit of ${genModel.contextLimit}`,
              context_limit: genModel.contextLimit,
            });
            return;
          }
        }
        send(res, 200, {
          outputs: genModel.generate(body.prompts, maxNewTokens, decodeHint),
          model: genModel.name,
        });
        return;
      }

      send(res, 404, { error: `no route for ${req.method} ${req.url}` });
    } catch (err) {
      send(res, 500, { error: String(err) });
    }
  });
}
