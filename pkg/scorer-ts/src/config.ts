/** Model hyperparameters. Defaults are the desk-scale configuration; the
 * reference full-scale stack (12 layers, 768 hidden, 3072 ffn, 12 heads)
 * is deliberately out of reach here. */

export interface ToyModelConfig {
  layers: number;
  hidden: number;
  ffn: number;
  heads: number;
  vocab: number;
  maxPositions: number;
  nContents: number;
  dropout: number;
  weightDecay: number;
  initStd: number;
  lmLossWeight: number;
}

export const DEFAULTS: Omit<ToyModelConfig, "vocab"> = {
  layers: 2,
  hidden: 64,
  ffn: 256,
  heads: 2,
  maxPositions: 512,
  nContents: 32,
  dropout: 0.1,
  weightDecay: 0.01,
  initStd: 0.02,
  lmLossWeight: 0.5,
};

export function makeConfig(
  vocab: number,
  overrides: Partial<ToyModelConfig> = {},
): ToyModelConfig {
  const cfg = { ...DEFAULTS, vocab, ...overrides };
  validateConfig(cfg);
  return cfg;
}

export function validateConfig(cfg: ToyModelConfig): void {
  if (cfg.hidden % cfg.heads !== 0) {
    throw new Error(`hidden ${cfg.hidden} not divisible by heads ${cfg.heads}`);
  }
  if (cfg.vocab < 2) throw new Error("vocab must be >= 2");
  if (cfg.layers < 1) throw new Error("layers must be >= 1");
  if (cfg.dropout < 0 || cfg.dropout >= 1) throw new Error("dropout outside [0, 1)");
  if (cfg.maxPositions < 1) throw new Error("maxPositions must be >= 1");
}
