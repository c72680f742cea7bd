import { loadConfig } from './config.js';
import { HashingEmbedder } from './embedder.js';
import { ExemplarCopyGenerator } from './generator.js';
import { buildServer } from './server.js';

const config = loadConfig();
const server = buildServer({
  embedModel: new HashingEmbedder(config.dimension, config.pooling),
  genModel: config.generatorEnabled ? new ExemplarCopyGenerator(config.maxContextTokens) : null,
});

server.listen(config.port, () => {
  console.log(
    `sidecar listening on :${config.port} ` +
      `(dimension=${config.dimension}, pooling=${config.pooling}, ` +
      `generator=${config.generatorEnabled ? 'on' : 'off'})`,
  );
});
