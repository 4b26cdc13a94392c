/** Panel builders: angular log-density plots, launch loci, and overlays.
 *
 * Panels consume only documented CSV columns and never recompute physics;
 * rendering is a pure function of the inputs, so re-running a spec yields a
 * byte-identical image.
 */

import { readFileSync } from "node:fs";
import { Table, hasColumnData, numericColumn, parseCsv } from "./csv.js";
import { CurveSpec, renderFigure } from "./svg.js";

export interface PanelSpec {
  kind: "angular-log" | "locus" | "overlay";
  inputs: string[];
  output: string;
  title?: string;
  labels?: string[];
  x_range?: [number, number];
  y_range?: [number, number];
}

export function validateSpec(raw: unknown): PanelSpec {
  if (typeof raw !== "object" || raw === null) {
    throw new Error("panel spec must be a JSON object");
  }
  const spec = raw as Record<string, unknown>;
  const kind = spec.kind;
  if (kind !== "angular-log" && kind !== "locus" && kind !== "overlay") {
    throw new Error(`unknown panel kind '${String(kind)}'`);
  }
  if (!Array.isArray(spec.inputs) || spec.inputs.length === 0) {
    throw new Error("panel spec needs a non-empty 'inputs' array");
  }
  if (typeof spec.output !== "string") {
    throw new Error("panel spec needs an 'output' path");
  }
  return spec as unknown as PanelSpec;
}

function loadTable(path: string): Table {
  return parseCsv(readFileSync(path, "utf8"));
}

function lnOrNaN(v: number): number {
  return v > 0 ? Math.log(v) : NaN;
}

function finiteExtent(values: number[], fallback: [number, number]): [number, number] {
  const vs = values.filter(Number.isFinite);
  if (vs.length === 0) return fallback;
  return [Math.min(...vs), Math.max(...vs)];
}

/** Fig 1(b)-style: ln density vs emission angle, quantum/uniform/primitive. */
export function angularLogPanel(spec: PanelSpec): string {
  const table = loadTable(spec.inputs[0]);
  const curves: CurveSpec[] = [];
  let theta: number[] = [];
  if (table.rows.length > 0) {
    theta = numericColumn(table, "theta_deg");
    const entries: [string, string, string | undefined, string][] = [
      ["quantum_au", "black", undefined, "quantum"],
      ["uniform_au", "#c02020", "7 4", "uniform"],
      ["primitive_au", "#2040c0", "2 3", "primitive"],
    ];
    for (const [col, stroke, dash, label] of entries) {
      if (hasColumnData(table, col)) {
        curves.push({
          xs: theta,
          ys: numericColumn(table, col).map(lnOrNaN),
          label,
          stroke,
          dash,
        });
      }
    }
  }
  const allY = curves.flatMap((c) => c.ys);
  const yDom = spec.y_range ?? finiteExtent(allY, [-1, 1]);
  return renderFigure({
    curves,
    xLabel: "emission angle [deg]",
    yLabel: "ln d3P/(de dOmega) [a.u.]",
    title: spec.title ?? "angle-resolved ionization density",
    xDomain: spec.x_range ?? [0, 180],
    yDomain: yDom,
  });
}

/** Fig 1(a)/2(a)/2(b)-style: meridional section of the launch locus. */
export function locusPanel(spec: PanelSpec): string {
  const table = loadTable(spec.inputs[0]);
  const groups: { xs: number[]; ys: number[]; label: string; fill: string }[] = [];
  let ext: [number, number] = [-1, 1];
  if (table.rows.length > 0) {
    const r0 = numericColumn(table, "r0_bohr");
    const th = numericColumn(table, "theta0_deg").map((d) => (d * Math.PI) / 180);
    const branch = numericColumn(table, "branch");
    const xs = r0.map((r, i) => r * Math.sin(th[i]));
    const zs = r0.map((r, i) => r * Math.cos(th[i]));
    for (const [sig, fill, label] of [
      [1, "#c02020", "outgoing branch"],
      [-1, "#2040c0", "incoming branch"],
    ] as const) {
      const sel = branch.map((b) => b === sig);
      groups.push({
        xs: xs.filter((_, i) => sel[i]),
        ys: zs.filter((_, i) => sel[i]),
        label,
        fill,
      });
    }
    const span = Math.max(...r0.filter(Number.isFinite), 1);
    ext = [-0.05 * span, span * 1.05];
  }
  const zExt = finiteExtent(groups.flatMap((g) => g.ys), [-1, 1]);
  return renderFigure({
    curves: [],
    points: groups,
    xLabel: "rho = r0 sin(theta0) [bohr]",
    yLabel: "z = r0 cos(theta0) [bohr]",
    title: spec.title ?? "launch locus (meridional section)",
    xDomain: spec.x_range ?? ext,
    yDomain: spec.y_range ?? [zExt[0] * 1.05, zExt[1] * 1.05],
  });
}

/** Fig 2(c)-style: uniform densities of two runs overlaid (impulse vs pulse). */
export function overlayPanel(spec: PanelSpec): string {
  if (spec.inputs.length < 2) {
    throw new Error("overlay panel needs two input CSVs");
  }
  const styles: [string, string | undefined][] = [
    ["black", undefined],
    ["#c02020", "7 4"],
  ];
  const curves: CurveSpec[] = [];
  spec.inputs.slice(0, 2).forEach((path, i) => {
    const table = loadTable(path);
    if (table.rows.length === 0) return;
    curves.push({
      xs: numericColumn(table, "theta_deg"),
      ys: numericColumn(table, "uniform_au").map(lnOrNaN),
      label: spec.labels?.[i] ?? (i === 0 ? "impulse" : "pulse"),
      stroke: styles[i][0],
      dash: styles[i][1],
    });
  });
  const allY = curves.flatMap((c) => c.ys);
  return renderFigure({
    curves,
    xLabel: "emission angle [deg]",
    yLabel: "ln d3P/(de dOmega) [a.u.]",
    title: spec.title ?? "impulse vs finite pulse",
    xDomain: spec.x_range ?? [0, 180],
    yDomain: spec.y_range ?? finiteExtent(allY, [-1, 1]),
  });
}

export function renderPanel(spec: PanelSpec): string {
  switch (spec.kind) {
    case "angular-log":
      return angularLogPanel(spec);
    case "locus":
      return locusPanel(spec);
    case "overlay":
      return overlayPanel(spec);
  }
}
