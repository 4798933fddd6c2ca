/* tslint:disable */
/* eslint-disable */
export const memory: WebAssembly.Memory;
export const __wbg_demo_free: (a: number, b: number) => void;
export const __wbg_gateresult_free: (a: number, b: number) => void;
export const demo_checkFraming: (a: number, b: number, c: number) => [number, number, number, number];
export const demo_compareGlyphs: (a: number, b: number, c: number, d: number, e: number) => [number, number, number, number];
export const demo_glyphCanvas: () => number;
export const demo_modelBytes: (a: number) => [number, number];
export const demo_new: (a: number, b: number) => [number, number, number];
export const demo_renderGlyph: (a: number, b: number, c: number) => [number, number, number, number];
export const gateWav: (a: number, b: number) => [number, number, number];
export const gateresult_summary: (a: number) => [number, number, number, number];
export const gateresult_wav: (a: number) => [number, number];
export const __wbindgen_externrefs: WebAssembly.Table;
export const __wbindgen_malloc: (a: number, b: number) => number;
export const __externref_table_dealloc: (a: number) => void;
export const __wbindgen_free: (a: number, b: number, c: number) => void;
export const __wbindgen_start: () => void;
