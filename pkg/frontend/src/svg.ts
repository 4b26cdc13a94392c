/** Deterministic SVG assembly: fixed canvas, fixed fonts, fixed precision. */

export const WIDTH = 720;
export const HEIGHT = 480;
export const MARGIN = { left: 70, right: 20, top: 40, bottom: 55 };

export interface Scale {
  (v: number): number;
  domain: [number, number];
}

export function linearScale(domain: [number, number], range: [number, number]): Scale {
  const [d0, d1] = domain;
  const [r0, r1] = range;
  const f = ((v: number) => r0 + ((v - d0) / (d1 - d0 || 1)) * (r1 - r0)) as Scale;
  f.domain = domain;
  return f;
}

const fmt = (v: number) => (Object.is(v, -0) ? "0" : v.toFixed(2));

export function polylinePath(xs: number[], ys: number[]): string {
  let d = "";
  let pen = false;
  for (let i = 0; i < xs.length; i++) {
    if (!Number.isFinite(xs[i]) || !Number.isFinite(ys[i])) {
      pen = false;
      continue;
    }
    d += (pen ? "L" : "M") + fmt(xs[i]) + " " + fmt(ys[i]);
    pen = true;
  }
  return d;
}

export function niceTicks(lo: number, hi: number, n = 6): number[] {
  if (!(hi > lo)) return [lo];
  const span = hi - lo;
  const step0 = span / Math.max(n - 1, 1);
  const mag = Math.pow(10, Math.floor(Math.log10(step0)));
  const candidates = [1, 2, 2.5, 5, 10].map((c) => c * mag);
  const step = candidates.find((c) => span / c <= n) ?? candidates[candidates.length - 1];
  const start = Math.ceil(lo / step) * step;
  const out: number[] = [];
  for (let v = start; v <= hi + 1e-9 * span; v += step) {
    out.push(Math.abs(v) < 1e-12 * span ? 0 : Number(v.toPrecision(12)));
  }
  return out;
}

export interface CurveSpec {
  xs: number[];
  ys: number[];
  label: string;
  stroke: string;
  dash?: string;
}

export function renderFigure(opts: {
  curves: CurveSpec[];
  points?: { xs: number[]; ys: number[]; label: string; fill: string }[];
  xLabel: string;
  yLabel: string;
  title: string;
  xDomain: [number, number];
  yDomain: [number, number];
}): string {
  const x = linearScale(opts.xDomain, [MARGIN.left, WIDTH - MARGIN.right]);
  const y = linearScale(opts.yDomain, [HEIGHT - MARGIN.bottom, MARGIN.top]);
  const parts: string[] = [];
  parts.push(
    `<svg xmlns="http://www.w3.org/2000/svg" width="${WIDTH}" height="${HEIGHT}" viewBox="0 0 ${WIDTH} ${HEIGHT}" font-family="monospace">`,
  );
  parts.push(`<rect width="${WIDTH}" height="${HEIGHT}" fill="white"/>`);
  // frame
  const x0 = MARGIN.left, x1 = WIDTH - MARGIN.right;
  const y0 = HEIGHT - MARGIN.bottom, y1 = MARGIN.top;
  parts.push(
    `<rect x="${x0}" y="${y1}" width="${x1 - x0}" height="${y0 - y1}" fill="none" stroke="black" stroke-width="1"/>`,
  );
  // ticks
  for (const t of niceTicks(opts.xDomain[0], opts.xDomain[1], 7)) {
    const px = fmt(x(t));
    parts.push(`<line x1="${px}" y1="${y0}" x2="${px}" y2="${y0 + 5}" stroke="black"/>`);
    parts.push(
      `<text x="${px}" y="${y0 + 20}" text-anchor="middle" font-size="12">${t}</text>`,
    );
  }
  for (const t of niceTicks(opts.yDomain[0], opts.yDomain[1], 6)) {
    const py = fmt(y(t));
    parts.push(`<line x1="${x0 - 5}" y1="${py}" x2="${x0}" y2="${py}" stroke="black"/>`);
    parts.push(
      `<text x="${x0 - 9}" y="${py}" text-anchor="end" dominant-baseline="middle" font-size="12">${t}</text>`,
    );
  }
  parts.push(
    `<text x="${(x0 + x1) / 2}" y="${HEIGHT - 12}" text-anchor="middle" font-size="14">${opts.xLabel}</text>`,
  );
  parts.push(
    `<text x="18" y="${(y0 + y1) / 2}" text-anchor="middle" font-size="14" transform="rotate(-90 18 ${(y0 + y1) / 2})">${opts.yLabel}</text>`,
  );
  parts.push(
    `<text x="${(x0 + x1) / 2}" y="24" text-anchor="middle" font-size="15">${opts.title}</text>`,
  );
  // clip
  parts.push(
    `<clipPath id="plot"><rect x="${x0}" y="${y1}" width="${x1 - x0}" height="${y0 - y1}"/></clipPath>`,
  );
  let legendY = y1 + 16;
  for (const c of opts.curves) {
    const d = polylinePath(c.xs.map(x), c.ys.map(y));
    const dash = c.dash ? ` stroke-dasharray="${c.dash}"` : "";
    parts.push(
      `<path d="${d}" fill="none" stroke="${c.stroke}" stroke-width="1.5"${dash} clip-path="url(#plot)"/>`,
    );
    parts.push(
      `<line x1="${x1 - 150}" y1="${legendY}" x2="${x1 - 120}" y2="${legendY}" stroke="${c.stroke}" stroke-width="1.5"${dash}/>`,
    );
    parts.push(
      `<text x="${x1 - 114}" y="${legendY + 4}" font-size="12">${c.label}</text>`,
    );
    legendY += 18;
  }
  for (const p of opts.points ?? []) {
    for (let i = 0; i < p.xs.length; i++) {
      if (!Number.isFinite(p.xs[i]) || !Number.isFinite(p.ys[i])) continue;
      parts.push(
        `<circle cx="${fmt(x(p.xs[i]))}" cy="${fmt(y(p.ys[i]))}" r="1.2" fill="${p.fill}" clip-path="url(#plot)"/>`,
      );
    }
    parts.push(
      `<circle cx="${x1 - 143}" cy="${legendY - 4}" r="2.5" fill="${p.fill}"/>`,
    );
    parts.push(`<text x="${x1 - 114}" y="${legendY}" font-size="12">${p.label}</text>`);
    legendY += 18;
  }
  parts.push("</svg>");
  return parts.join("\n") + "\n";
}
