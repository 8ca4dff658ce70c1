/** Training configuration for the cascaded denoiser. */

export type FreezeTarget = "stage1" | "stage2" | null;

export interface PhaseSpec {
  /** weight of the first-stage loss in the total; 1 trains stage 1 only */
  alpha: number;
  freeze: FreezeTarget;
  epochs: number;
}

export interface CascadeConfig {
  spectrumLength: number;
  /** base channel count of each stage network */
  width: number;
  attnWidth: number;
  batchSize: number;
  learningRate: number;
  schedule: PhaseSpec[];
  seed: number;
}

export function defaultConfig(): CascadeConfig {
  return {
    spectrumLength: 693,
    width: 8,
    attnWidth: 4,
    batchSize: 32,
    learningRate: 2e-5,
    schedule: [
      { alpha: 1.0, freeze: "stage2", epochs: 50 },
      { alpha: 0.0, freeze: "stage1", epochs: 100 },
      { alpha: 0.5, freeze: null, epochs: 50 },
    ],
    seed: 1,
  };
}

export function validateConfig(cfg: CascadeConfig): void {
  if (cfg.spectrumLength < 8) throw new Error("spectrumLength too small");
  if (cfg.width < 1 || cfg.attnWidth < 1) throw new Error("widths must be >= 1");
  if (cfg.batchSize < 1) throw new Error("batchSize must be >= 1");
  if (!(cfg.learningRate > 0)) throw new Error("learningRate must be positive");
  if (cfg.schedule.length === 0) throw new Error("schedule must have at least one phase");
  for (const p of cfg.schedule) {
    if (p.alpha < 0 || p.alpha > 1) throw new Error("alpha must lie in [0, 1]");
    if (p.epochs < 0) throw new Error("epochs must be >= 0");
  }
}
