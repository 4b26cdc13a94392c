#!/usr/bin/env node
/** Render figure panels from simulator CSVs: `hcpspectra-panels spec.json ...` */

import { readFileSync, writeFileSync } from "node:fs";
import { renderPanel, validateSpec } from "./panels.js";

export function main(argv: string[]): number {
  const specs = argv.filter((a) => !a.startsWith("-"));
  if (specs.length === 0 || argv.includes("--help")) {
    console.error("usage: hcpspectra-panels <panel-spec.json> [...]");
    return specs.length === 0 ? 2 : 0;
  }
  for (const path of specs) {
    let spec;
    try {
      spec = validateSpec(JSON.parse(readFileSync(path, "utf8")));
    } catch (err) {
      console.error(`${path}: invalid panel spec: ${(err as Error).message}`);
      return 2;
    }
    try {
      const svg = renderPanel(spec);
      writeFileSync(spec.output, svg);
      console.log(`wrote ${spec.output}`);
    } catch (err) {
      console.error(`${path}: ${(err as Error).message}`);
      return 1;
    }
  }
  return 0;
}

import { pathToFileURL } from "node:url";

if (process.argv[1] && import.meta.url === pathToFileURL(process.argv[1]).href) {
  process.exit(main(process.argv.slice(2)));
}
