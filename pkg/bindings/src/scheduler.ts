/**
 * Stateful driver for the loss-feedback mask-ratio scheduler.
 *
 * Semantics mirror the primary implementation exactly: a sigmoid step-size
 * schedule recomputed at each epoch boundary, and a per-update direction
 * rule against the mean of the recent loss window (ties decrease). State
 * imports/exports as the same JSON fragments the primary writes into its
 * run checkpoints, so a handle can pick up where a checkpointed run left
 * off (and vice versa).
 */

import { ConfigError, InputError, StateError } from "./errors.js";

export interface SchedulerConfig {
    eta_min: number;
    eta_max: number;
    k: number;
    midpoint: number;
    mu_0: number;
    mu_min: number;
    mu_max: number;
    loss_window: number;
    total_epochs: number;
    mu_cadence: string;
    loss_source: string;
}

export interface SchedulerState {
    mu: number;
    eta: number;
    epoch: number;
    loss_history: number[];
    update_count: number;
}

export interface SchedulerFragment {
    config: SchedulerConfig;
    state: SchedulerState;
}

export interface StepResult {
    mu: number;
    eta: number;
}

const DEFAULTS: SchedulerConfig = {
    eta_min: 0.01,
    eta_max: 0.02,
    k: 10.0,
    midpoint: 0.5,
    mu_0: 0.5,
    mu_min: 0.1,
    mu_max: 0.9,
    loss_window: 3,
    total_epochs: 100,
    mu_cadence: "iteration",
    loss_source: "mask",
};

function validateConfig(cfg: SchedulerConfig): void {
    if (!(0 <= cfg.eta_min && cfg.eta_min <= cfg.eta_max)) {
        throw new ConfigError(
            `eta_min/eta_max: need 0 <= eta_min <= eta_max, got eta_min=${cfg.eta_min}, eta_max=${cfg.eta_max}`,
        );
    }
    if (!(0 <= cfg.mu_min && cfg.mu_min <= cfg.mu_0 && cfg.mu_0 <= cfg.mu_max && cfg.mu_max <= 1)) {
        throw new ConfigError(
            `mu bounds: need 0 <= mu_min <= mu_0 <= mu_max <= 1, got mu_min=${cfg.mu_min}, mu_0=${cfg.mu_0}, mu_max=${cfg.mu_max}`,
        );
    }
    if (cfg.loss_window < 1) throw new ConfigError(`loss_window: must be >= 1, got ${cfg.loss_window}`);
    if (cfg.total_epochs < 1) throw new ConfigError(`total_epochs: must be >= 1, got ${cfg.total_epochs}`);
    if (!(cfg.k > 0)) throw new ConfigError(`k: must be > 0, got ${cfg.k}`);
}

function checkLoss(lCurrent: number): number {
    if (!Number.isFinite(lCurrent) || lCurrent < 0) {
        throw new InputError(`loss must be finite and >= 0, got ${lCurrent}`);
    }
    return lCurrent;
}

export class BoundScheduler {
    readonly config: SchedulerConfig;
    private state: SchedulerState;

    constructor(config: Partial<SchedulerConfig> = {}) {
        this.config = { ...DEFAULTS, ...config };
        validateConfig(this.config);
        this.state = {
            mu: this.config.mu_0,
            eta: this.config.eta_max,
            epoch: 0,
            loss_history: [],
            update_count: 0,
        };
    }

    stepSize(x: number): number {
        if (!(x >= 0 && x <= 1)) {
            throw new InputError(`epoch fraction must lie in [0, 1], got ${x}`);
        }
        const sig = 1 / (1 + Math.exp(-this.config.k * (x - this.config.midpoint)));
        return this.config.eta_min + (this.config.eta_max - this.config.eta_min) * (1 - sig);
    }

    advanceEpoch(): StepResult {
        if (this.state.epoch >= this.config.total_epochs) {
            throw new StateError(
                `cannot advance past total_epochs=${this.config.total_epochs} (epoch=${this.state.epoch})`,
            );
        }
        const epoch = this.state.epoch + 1;
        this.state = {
            ...this.state,
            epoch,
            eta: this.stepSize(epoch / this.config.total_epochs),
        };
        return { mu: this.state.mu, eta: this.state.eta };
    }

    /** One feedback update; returns the new ratio and current step size. */
    step(lCurrent: number): StepResult {
        checkLoss(lCurrent);
        const history = this.state.loss_history;
        let baseline: number;
        if (history.length >= this.config.loss_window) {
            const recent = history.slice(-this.config.loss_window);
            baseline = recent.reduce((acc, v) => acc + v, 0) / recent.length;
        } else {
            baseline = lCurrent;
        }
        let mu = lCurrent >= baseline ? this.state.mu - this.state.eta : this.state.mu + this.state.eta;
        mu = Math.min(Math.max(mu, this.config.mu_min), this.config.mu_max);
        this.state = {
            mu,
            eta: this.state.eta,
            epoch: this.state.epoch,
            loss_history: [...history, lCurrent].slice(-this.config.loss_window),
            update_count: this.state.update_count + 1,
        };
        return { mu: this.state.mu, eta: this.state.eta };
    }

    snapshot(): SchedulerState {
        return { ...this.state, loss_history: [...this.state.loss_history] };
    }

    /** Checkpoint fragment, shaped exactly like the primary's. */
    exportState(): SchedulerFragment {
        return { config: { ...this.config }, state: this.snapshot() };
    }

    static importState(fragment: SchedulerFragment): BoundScheduler {
        const handle = new BoundScheduler(fragment.config);
        const s = fragment.state;
        for (const key of ["mu", "eta", "epoch", "loss_history", "update_count"] as const) {
            if (!(key in s)) throw new InputError(`scheduler state fragment missing ${key}`);
        }
        handle.state = {
            mu: s.mu,
            eta: s.eta,
            epoch: s.epoch,
            loss_history: [...s.loss_history],
            update_count: s.update_count,
        };
        return handle;
    }
}
