export interface SidecarConfig {
  port: number;
  dimension: number;
  pooling: 'mean' | 'sum';
  maxContextTokens: number;
  generatorEnabled: boolean;
}

function intEnv(name: string, fallback: number): number {
  const raw = process.env[name];
  if (!raw) return fallback;
  const value = Number.parseInt(raw, 10);
  if (!Number.isFinite(value) || value < 1) {
    throw new Error(`${name} must be a positive integer, got ${raw}`);
  }
  return value;
}

export function loadConfig(): SidecarConfig {
  const pooling = process.env.SIDECAR_POOLING ?? 'mean';
  if (pooling !== 'mean' && pooling !== 'sum') {
    throw new Error(`SIDECAR_POOLING must be "mean" or "sum", got ${pooling}`);
  }
  return {
    port: intEnv('SIDECAR_PORT', 8230),
    dimension: intEnv('SIDECAR_DIMENSION', 256),
    pooling,
    maxContextTokens: intEnv('SIDECAR_MAX_CONTEXT', 4096),
    generatorEnabled: process.env.SIDECAR_DISABLE_GENERATOR !== '1',
  };
}
