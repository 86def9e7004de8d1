import { join } from "node:path";
import { describe, expect, it } from "vitest";

import { BoundScheduler, InputError, StateError } from "../src/index.js";
import { column, readCsv, readJson, runCli, tempDir } from "./support.js";

const TOL = 1e-12;

describe("BoundScheduler unit behavior", () => {
    it("mirrors the decrease-branch update", () => {
        const handle = BoundScheduler.importState({
            config: new BoundScheduler().exportState().config,
            state: { mu: 0.5, eta: 0.015, epoch: 1, loss_history: [1.0, 1.0, 1.0], update_count: 3 },
        });
        const { mu } = handle.step(1.2);
        expect(Math.abs(mu - 0.485)).toBeLessThanOrEqual(TOL);
    });

    it("raises on a NaN loss with the primary's message", () => {
        const handle = new BoundScheduler();
        expect(() => handle.step(Number.NaN)).toThrowError(InputError);
        expect(() => handle.step(Number.NaN)).toThrowError(/loss must be finite and >= 0/);
    });

    it("refuses to advance past the horizon", () => {
        const handle = new BoundScheduler({ total_epochs: 1 });
        handle.advanceEpoch();
        expect(() => handle.advanceEpoch()).toThrowError(StateError);
    });

    it("export -> import -> step equals an uninterrupted run", () => {
        const a = new BoundScheduler({ total_epochs: 10 });
        const losses = [0.9, 1.4, 0.7, 1.1, 0.5, 0.8];
        a.advanceEpoch();
        for (const loss of losses.slice(0, 3)) a.step(loss);
        const b = BoundScheduler.importState(a.exportState());
        for (const loss of losses.slice(3)) {
            const ra = a.step(loss);
            const rb = b.step(loss);
            expect(rb.mu).toBe(ra.mu);
            expect(rb.eta).toBe(ra.eta);
        }
    });
});

describe("trajectory equivalence against the primary CLI", () => {
    it("replays schedule-trace (200 seeded epochs) within 1e-12", () => {
        const dir = tempDir("selfteach-trace-");
        const out = join(dir, "trace.csv");
        runCli(["schedule-trace", "--epochs", "200", "--loss-seed", "7", "--out", out]);
        const table = readCsv(out);
        expect(table.rows.length).toBe(200);

        const handle = new BoundScheduler({ total_epochs: 200 });
        const losses = column(table, "loss").map(Number);
        const etas = column(table, "eta").map(Number);
        const mus = column(table, "mu").map(Number);
        for (let i = 0; i < 200; i++) {
            handle.advanceEpoch();
            const { mu, eta } = handle.step(losses[i]);
            expect(Math.abs(eta - etas[i])).toBeLessThanOrEqual(TOL);
            expect(Math.abs(mu - mus[i])).toBeLessThanOrEqual(TOL);
        }
    });

    it("replays a full simulate run's per-iteration feedback within 1e-12", () => {
        const dir = tempDir("selfteach-sim-");
        runCli(["simulate", "--output", dir]);
        const checkpoint = readJson(join(dir, "checkpoint.json"));
        const metrics = readCsv(join(dir, "metrics.csv"));
        const itersPerEpoch: number = checkpoint.run.loop.iters_per_epoch;

        const handle = new BoundScheduler(checkpoint.run.scheduler);
        const mus = column(metrics, "mu").map(Number);
        const etas = column(metrics, "eta").map(Number);
        const lMasks = column(metrics, "l_mask").map(Number);
        for (let i = 0; i < metrics.rows.length; i++) {
            if (i % itersPerEpoch === 0) handle.advanceEpoch();
            const before = handle.snapshot();
            expect(Math.abs(before.mu - mus[i])).toBeLessThanOrEqual(TOL);
            expect(Math.abs(before.eta - etas[i])).toBeLessThanOrEqual(TOL);
            handle.step(lMasks[i]);
        }
        // the handle's final state matches the checkpoint fragment
        const final = handle.snapshot();
        expect(Math.abs(final.mu - checkpoint.states.scheduler.mu)).toBeLessThanOrEqual(TOL);
        expect(final.update_count).toBe(checkpoint.states.scheduler.update_count);
    });

    it("continues bit-identically from a primary checkpoint fragment", () => {
        const dir = tempDir("selfteach-frag-");
        runCli(["simulate", "--output", dir, "--stop-after", "100"]);
        const head = readJson(join(dir, "checkpoint.json"));
        const fragment = { config: head.run.scheduler, state: head.states.scheduler };

        const tailDir = tempDir("selfteach-frag-tail-");
        runCli(["resume", "--checkpoint", join(dir, "checkpoint.json"), "--output", tailDir]);
        const metrics = readCsv(join(tailDir, "metrics.csv"));
        const handle = BoundScheduler.importState(fragment);
        const itersPerEpoch: number = head.run.loop.iters_per_epoch;
        const iterations = column(metrics, "iteration").map(Number);
        const mus = column(metrics, "mu").map(Number);
        const lMasks = column(metrics, "l_mask").map(Number);
        for (let i = 0; i < metrics.rows.length; i++) {
            if ((iterations[i] - 1) % itersPerEpoch === 0) handle.advanceEpoch();
            expect(Math.abs(handle.snapshot().mu - mus[i])).toBeLessThanOrEqual(TOL);
            handle.step(lMasks[i]);
        }
    });
});
