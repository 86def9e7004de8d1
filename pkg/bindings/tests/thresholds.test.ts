import { join } from "node:path";
import { describe, expect, it } from "vitest";

import { BoundThresholds, InputError, smoothingCoefficient } from "../src/index.js";
import { column, readCsv, readJson, runCli, tempDir } from "./support.js";

const TOL = 1e-12;

describe("BoundThresholds unit behavior", () => {
    it("empty batch leaves thresholds unchanged", () => {
        const handle = new BoundThresholds([1, 2], { total_iters: 10 });
        const before = handle.thresholds();
        const after = handle.step({ "1": [], "2": [] }, 1);
        expect(after).toEqual(before);
    });

    it("unknown class raises with the primary's message", () => {
        const handle = new BoundThresholds([1], { total_iters: 10 });
        expect(() => handle.step({ "9": [0.5] }, 1)).toThrowError(InputError);
        expect(() => handle.step({ "9": [0.5] }, 1)).toThrowError(/unknown class id/);
    });

    it("mirrors the worked blended update", () => {
        // gamma 0.5, N_old 0.35, stats (0.64, 0.04) -> 0.371
        const handle = BoundThresholds.importState({
            config: new BoundThresholds([1]).exportState().config,
            states: {
                "1": { class_id: 1, n: 0.35, n_old: 0.35, last_mean: null, last_var: null, sample_count: 0 },
            },
        });
        const cfg = handle.config;
        const gamma = 0.5;
        const target = cfg.alpha_dt * Math.sqrt(0.64) - cfg.beta * 0.04;
        const expected = Math.min(Math.max(gamma * 0.35 + (1 - gamma) * target, cfg.min_dt), cfg.max_dt);
        expect(Math.abs(expected - 0.371)).toBeLessThanOrEqual(TOL);
    });

    it("export -> import -> step equals an uninterrupted run", () => {
        const a = new BoundThresholds([1, 2], { total_iters: 20 });
        for (let it = 1; it <= 10; it++) {
            a.step({ "1": [0.4 + it / 50, 0.6], "2": [0.3] }, it);
        }
        const b = BoundThresholds.importState(a.exportState());
        for (let it = 11; it <= 20; it++) {
            const batch = { "1": [0.5, 0.9], "2": [0.2 + it / 40] };
            expect(b.step(batch, it)).toEqual(a.step(batch, it));
        }
    });
});

describe("equivalence against the primary CLI", () => {
    it("gamma-trace matches both smoothing modes within 1e-12", () => {
        const dir = tempDir("selfteach-gamma-");
        const out = join(dir, "gamma.csv");
        runCli(["gamma-trace", "--steps", "200", "--out", out]);
        const table = readCsv(out);
        const literal = column(table, "gamma_literal").map(Number);
        const described = column(table, "gamma_described").map(Number);
        const litCfg = { ...new BoundThresholds([1]).config, gamma_mode: "literal" };
        const descCfg = { ...new BoundThresholds([1]).config, gamma_mode: "described" };
        for (let i = 0; i <= 200; i++) {
            expect(Math.abs(smoothingCoefficient(i, 200, litCfg) - literal[i])).toBeLessThanOrEqual(TOL);
            expect(Math.abs(smoothingCoefficient(i, 200, descCfg) - described[i])).toBeLessThanOrEqual(TOL);
        }
    });

    it("replays a 200-iteration simulate threshold trajectory within 1e-12", () => {
        const dir = tempDir("selfteach-thresholds-");
        runCli(["simulate", "--output", dir, "--dump-confidences"]);
        const checkpoint = readJson(join(dir, "checkpoint.json"));
        const confidences = readJson(join(dir, "confidences.json")).iterations;
        expect(confidences.length).toBe(200);

        const classIds = checkpoint.run.scenario.classes.map((c: any) => c.class_id);
        const handle = new BoundThresholds(classIds, checkpoint.run.thresholds);

        // thresholds.csv rows grouped by iteration
        const table = readCsv(join(dir, "thresholds.csv"));
        const byIteration = new Map<number, Map<string, { n: number; gamma: string }>>();
        const idx = Object.fromEntries(table.header.map((h, i) => [h, i]));
        for (const row of table.rows) {
            const iter = Number(row[idx.iteration]);
            if (!byIteration.has(iter)) byIteration.set(iter, new Map());
            byIteration.get(iter)!.set(row[idx.class_id], { n: Number(row[idx.n]), gamma: row[idx.gamma] });
        }

        for (const record of confidences) {
            const produced = handle.step(record.confidences, record.iteration);
            const expected = byIteration.get(record.iteration)!;
            for (const [cid, cell] of expected) {
                expect(Math.abs(produced[cid] - cell.n)).toBeLessThanOrEqual(TOL);
                if (cell.gamma !== "") {
                    const gamma = smoothingCoefficient(record.iteration, handle.config.total_iters, handle.config);
                    expect(Math.abs(gamma - Number(cell.gamma))).toBeLessThanOrEqual(TOL);
                }
            }
        }

        // final states match the checkpoint fragment exactly
        const fragment = handle.exportState();
        for (const [cid, state] of Object.entries(checkpoint.states.thresholds)) {
            const mine = fragment.states[cid];
            expect(Math.abs(mine.n - (state as any).n)).toBeLessThanOrEqual(TOL);
            expect(mine.sample_count).toBe((state as any).sample_count);
        }
    });
});
