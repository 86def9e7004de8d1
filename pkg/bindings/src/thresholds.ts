/**
 * Stateful driver for the variance-feedback per-class threshold controller.
 *
 * Mirrors the primary update exactly: confidences below the stats floor are
 * excluded, classes with no admissible samples keep their threshold, and
 * each updated class blends its previous threshold with
 * alpha_dt*sqrt(mean) - beta*var under the progress-scheduled smoothing
 * coefficient, clamped to [min_dt, max_dt]. State crosses the boundary as
 * the primary's checkpoint fragments.
 */

import { ConfigError, InputError } from "./errors.js";

export interface ThresholdConfig {
    alpha_dt: number;
    beta: number;
    min_dt: number;
    max_dt: number;
    alpha_at: number;
    gamma_mode: string;
    stats_floor: number;
    n_init: number;
    total_iters: number;
}

export interface ClassThresholdState {
    class_id: number;
    n: number;
    n_old: number;
    last_mean: number | null;
    last_var: number | null;
    sample_count: number;
}

export interface ThresholdFragment {
    config: ThresholdConfig;
    states: Record<string, ClassThresholdState>;
}

const DEFAULTS: ThresholdConfig = {
    alpha_dt: 0.5,
    beta: 0.2,
    min_dt: 0.25,
    max_dt: 0.45,
    alpha_at: 10.0,
    gamma_mode: "described",
    stats_floor: 0.05,
    n_init: 0.3,
    total_iters: 1000,
};

function validateConfig(cfg: ThresholdConfig): void {
    if (!(0 <= cfg.min_dt && cfg.min_dt <= cfg.n_init && cfg.n_init <= cfg.max_dt && cfg.max_dt <= 1)) {
        throw new ConfigError(
            `threshold bounds: need 0 <= min_dt <= n_init <= max_dt <= 1, got min_dt=${cfg.min_dt}, n_init=${cfg.n_init}, max_dt=${cfg.max_dt}`,
        );
    }
    if (cfg.alpha_dt < 0) throw new ConfigError(`alpha_dt: must be >= 0, got ${cfg.alpha_dt}`);
    if (cfg.beta < 0) throw new ConfigError(`beta: must be >= 0, got ${cfg.beta}`);
    if (cfg.gamma_mode !== "described" && cfg.gamma_mode !== "literal") {
        throw new ConfigError(`gamma_mode: must be one of ('described', 'literal'), got '${cfg.gamma_mode}'`);
    }
    if (cfg.total_iters < 1) throw new ConfigError(`total_iters: must be >= 1, got ${cfg.total_iters}`);
}

export function smoothingCoefficient(currentIter: number, totalIters: number, cfg: ThresholdConfig): number {
    if (totalIters <= 0) throw new InputError(`total_iters must be > 0, got ${totalIters}`);
    if (!(currentIter >= 0 && currentIter <= totalIters)) {
        throw new InputError(`current_iter must lie in [0, ${totalIters}], got ${currentIter}`);
    }
    const x = currentIter / totalIters;
    if (cfg.gamma_mode === "literal") {
        return 1 / (1 + Math.exp(-cfg.alpha_at * x));
    }
    return 1 / (1 + Math.exp(cfg.alpha_at * (x - 0.5)));
}

export function classStats(confidences: number[]): [number, number] | null {
    if (confidences.length === 0) return null;
    for (const c of confidences) {
        if (!(Number.isFinite(c) && c >= 0 && c <= 1)) {
            throw new InputError(`confidence must lie in [0, 1], got ${c}`);
        }
    }
    const mean = confidences.reduce((acc, v) => acc + v, 0) / confidences.length;
    const varSum = confidences.reduce((acc, v) => acc + (v - mean) ** 2, 0);
    return [mean, varSum / confidences.length];
}

export class BoundThresholds {
    readonly config: ThresholdConfig;
    private states: Map<number, ClassThresholdState>;

    constructor(classIds: number[], config: Partial<ThresholdConfig> = {}) {
        this.config = { ...DEFAULTS, ...config };
        validateConfig(this.config);
        this.states = new Map(
            classIds.map((cid) => [
                cid,
                {
                    class_id: cid,
                    n: this.config.n_init,
                    n_old: this.config.n_init,
                    last_mean: null,
                    last_var: null,
                    sample_count: 0,
                },
            ]),
        );
    }

    thresholds(): Record<string, number> {
        const out: Record<string, number> = {};
        for (const [cid, state] of this.states) out[String(cid)] = state.n;
        return out;
    }

    /** One controller round over a per-class confidence batch. */
    step(batch: Record<string, number[]>, currentIter: number): Record<string, number> {
        const gamma = smoothingCoefficient(currentIter, this.config.total_iters, this.config);
        for (const key of Object.keys(batch)) {
            if (!this.states.has(Number(key))) {
                throw new InputError(`unknown class id in batch: ${key}`);
            }
        }
        for (const [key, confidences] of Object.entries(batch)) {
            const cid = Number(key);
            const admitted = confidences.filter((c) => c >= this.config.stats_floor);
            const stats = classStats(admitted);
            if (stats === null) continue;
            const [mean, variance] = stats;
            const prev = this.states.get(cid)!;
            const target = this.config.alpha_dt * Math.sqrt(mean) - this.config.beta * variance;
            const blended = gamma * prev.n + (1 - gamma) * target;
            this.states.set(cid, {
                class_id: cid,
                n: Math.min(Math.max(blended, this.config.min_dt), this.config.max_dt),
                n_old: prev.n,
                last_mean: mean,
                last_var: variance,
                sample_count: prev.sample_count + admitted.length,
            });
        }
        return this.thresholds();
    }

    /** Checkpoint fragment, shaped exactly like the primary's. */
    exportState(): ThresholdFragment {
        const states: Record<string, ClassThresholdState> = {};
        for (const [cid, state] of this.states) states[String(cid)] = { ...state };
        return { config: { ...this.config }, states };
    }

    static importState(fragment: ThresholdFragment): BoundThresholds {
        const ids = Object.keys(fragment.states).map(Number);
        const handle = new BoundThresholds(ids, fragment.config);
        for (const [key, state] of Object.entries(fragment.states)) {
            handle.states.set(Number(key), { ...state });
        }
        return handle;
    }
}
