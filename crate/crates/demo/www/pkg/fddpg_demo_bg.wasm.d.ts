/* tslint:disable */
/* eslint-disable */
export const memory: WebAssembly.Memory;
export const __wbg_drive_free: (a: number, b: number) => void;
export const drive_cause: (a: number) => [number, number];
export const drive_destination: (a: number) => [number, number];
export const drive_done: (a: number) => number;
export const drive_flags: (a: number) => [number, number];
export const drive_new: (a: bigint, b: number, c: number) => [number, number, number];
export const drive_roads: (a: number) => [number, number];
export const drive_signals: (a: number) => [number, number];
export const drive_speed: (a: number) => number;
export const drive_step: (a: number, b: number) => [number, number, number];
export const drive_steps: (a: number) => number;
export const drive_total_reward: (a: number) => number;
export const drive_vehicles: (a: number) => [number, number];
export const fedavg: (a: number, b: number, c: number, d: number, e: number) => [number, number, number, number];
export const ou_path: (a: number, b: number, c: number, d: bigint) => [number, number, number, number];
export const ou_stationary_std: (a: number, b: number) => number;
export const __wbindgen_externrefs: WebAssembly.Table;
export const __wbindgen_free: (a: number, b: number, c: number) => void;
export const __externref_table_dealloc: (a: number) => void;
export const __wbindgen_malloc: (a: number, b: number) => number;
export const __wbindgen_start: () => void;
