/* tslint:disable */
/* eslint-disable */

/**
 * One ego episode on the 2x2 signalized grid, stepped from the page.
 */
export class Drive {
    free(): void;
    [Symbol.dispose](): void;
    /**
     * Ended-by cause, or an empty string while running.
     */
    cause(): string;
    destination(): Float64Array;
    done(): boolean;
    /**
     * Space-separated names of the flags raised on the last step.
     */
    flags(): string;
    constructor(seed: bigint, background: number, distance_m: number);
    /**
     * Flat `[x1, y1, x2, y2]` per directed edge.
     */
    roads(): Float64Array;
    /**
     * Flat `[x, y, is_red]` at the stop line of every signalized edge.
     */
    signals(): Float64Array;
    speed(): number;
    /**
     * Applies one ego acceleration (m/s^2) and returns the step reward.
     */
    step(accel: number): number;
    steps(): number;
    total_reward(): number;
    /**
     * Flat `[x, y, heading, is_ego]` per vehicle, ego first.
     */
    vehicles(): Float64Array;
}

export function fedavg(weights: Float64Array, dim: number, episodes: Uint32Array): Float64Array;

export function ou_path(theta: number, sigma: number, steps: number, seed: bigint): Float64Array;

/**
 * Long-run standard deviation of the unit-step process.
 */
export function ou_stationary_std(theta: number, sigma: number): number;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly __wbg_drive_free: (a: number, b: number) => void;
    readonly drive_cause: (a: number) => [number, number];
    readonly drive_destination: (a: number) => [number, number];
    readonly drive_done: (a: number) => number;
    readonly drive_flags: (a: number) => [number, number];
    readonly drive_new: (a: bigint, b: number, c: number) => [number, number, number];
    readonly drive_roads: (a: number) => [number, number];
    readonly drive_signals: (a: number) => [number, number];
    readonly drive_speed: (a: number) => number;
    readonly drive_step: (a: number, b: number) => [number, number, number];
    readonly drive_steps: (a: number) => number;
    readonly drive_total_reward: (a: number) => number;
    readonly drive_vehicles: (a: number) => [number, number];
    readonly fedavg: (a: number, b: number, c: number, d: number, e: number) => [number, number, number, number];
    readonly ou_path: (a: number, b: number, c: number, d: bigint) => [number, number, number, number];
    readonly ou_stationary_std: (a: number, b: number) => number;
    readonly __wbindgen_externrefs: WebAssembly.Table;
    readonly __wbindgen_free: (a: number, b: number, c: number) => void;
    readonly __externref_table_dealloc: (a: number) => void;
    readonly __wbindgen_malloc: (a: number, b: number) => number;
    readonly __wbindgen_start: () => void;
}

export type SyncInitInput = BufferSource | WebAssembly.Module;

/**
 * Instantiates the given `module`, which can either be bytes or
 * a precompiled `WebAssembly.Module`.
 *
 * @param {{ module: SyncInitInput }} module - Passing `SyncInitInput` directly is deprecated.
 *
 * @returns {InitOutput}
 */
export function initSync(module: { module: SyncInitInput } | SyncInitInput): InitOutput;

/**
 * If `module_or_path` is {RequestInfo} or {URL}, makes a request and
 * for everything else, calls `WebAssembly.instantiate` directly.
 *
 * @param {{ module_or_path: InitInput | Promise<InitInput> }} module_or_path - Passing `InitInput` directly is deprecated.
 *
 * @returns {Promise<InitOutput>}
 */
export default function __wbg_init (module_or_path?: { module_or_path: InitInput | Promise<InitInput> } | InitInput | Promise<InitInput>): Promise<InitOutput>;
