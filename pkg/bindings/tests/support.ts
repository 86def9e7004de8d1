import { execFileSync } from "node:child_process";
import { mkdtempSync, readFileSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";

export const PYTHON = process.env.SELFTEACH_PYTHON ?? "python3";

export function runCli(args: string[]): string {
    return execFileSync(PYTHON, ["-m", "selfteach.cli", ...args], {
        encoding: "utf-8",
    });
}

export function tempDir(prefix: string): string {
    return mkdtempSync(join(tmpdir(), prefix));
}

export interface CsvTable {
    header: string[];
    rows: string[][];
}

export function readCsv(path: string): CsvTable {
    const lines = readFileSync(path, "utf-8").trim().split("\n");
    return {
        header: lines[0].split(","),
        rows: lines.slice(1).map((line) => line.split(",")),
    };
}

export function column(table: CsvTable, name: string): string[] {
    const idx = table.header.indexOf(name);
    if (idx < 0) throw new Error(`no column ${name} in ${table.header.join(",")}`);
    return table.rows.map((row) => row[idx]);
}

export function readJson(path: string): any {
    return JSON.parse(readFileSync(path, "utf-8"));
}
