/* tslint:disable */
/* eslint-disable */
export const memory: WebAssembly.Memory;
export const __wbg_discpair_free: (a: number, b: number) => void;
export const __wbg_evolution_free: (a: number, b: number) => void;
export const __wbg_phantomview_free: (a: number, b: number) => void;
export const discpair_energy: (a: number) => number;
export const discpair_forceRgba: (a: number) => [number, number];
export const discpair_new: (a: number, b: number, c: number, d: number) => [number, number, number];
export const energyCurve: (a: number, b: number, c: number, d: number) => [number, number, number, number];
export const evolution_energies: (a: number) => [number, number];
export const evolution_energy: (a: number) => number;
export const evolution_iou: (a: number) => number;
export const evolution_new: (a: number, b: number, c: number, d: number, e: number, f: number, g: number, h: number) => [number, number, number];
export const evolution_rgba: (a: number) => [number, number];
export const evolution_step: (a: number, b: number) => [number, number, number];
export const evolution_steps: (a: number) => number;
export const phantomview_foregroundFraction: (a: number) => number;
export const phantomview_imageRgba: (a: number) => [number, number];
export const phantomview_maskRgba: (a: number) => [number, number];
export const phantomview_new: (a: number, b: number, c: number, d: number, e: number) => [number, number, number];
export const phantomview_overlayRgba: (a: number) => [number, number];
export const phantomview_size: (a: number) => number;
export const __wbindgen_externrefs: WebAssembly.Table;
export const __wbindgen_free: (a: number, b: number, c: number) => void;
export const __externref_table_dealloc: (a: number) => void;
export const __wbindgen_malloc: (a: number, b: number) => number;
export const __wbindgen_realloc: (a: number, b: number, c: number, d: number) => number;
export const __wbindgen_start: () => void;
