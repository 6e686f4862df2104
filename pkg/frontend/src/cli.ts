/**
 * Batch figure builder.
 *
 * Usage:
 *   byzrobust-figures <recipe> --root <results-dir> --out <figures-dir>
 *   byzrobust-figures --list
 *
 * Each panel of the recipe reads <root>/<run>/metrics.csv and writes
 * <out>/<panel>.svg. Missing or malformed CSVs abort with an error naming
 * the file.
 */

import * as fs from "node:fs";
import * as path from "node:path";

import { FigureSpec, renderFigure } from "./figure.js";
import { RECIPES } from "./recipes.js";

function usage(): never {
  console.error(
    "usage: byzrobust-figures <recipe> --root <results-dir> [--out <figures-dir>]\n" +
      "       byzrobust-figures --list",
  );
  process.exit(2);
}

export function buildRecipe(recipe: string, root: string, out: string): string[] {
  const panels = RECIPES[recipe];
  if (!panels) {
    throw new Error(`unknown recipe ${JSON.stringify(recipe)}; known: ${Object.keys(RECIPES).sort().join(", ")}`);
  }
  fs.mkdirSync(out, { recursive: true });
  const written: string[] = [];
  for (const panel of panels) {
    const spec: FigureSpec = {
      title: panel.title,
      metric: panel.metric,
      inputs: Object.entries(panel.runs).map(([run, label]) => {
        const file = path.join(root, run, "metrics.csv");
        return { file, label, text: fs.readFileSync(file, "utf8") };
      }),
    };
    const target = path.join(out, `${panel.name}.svg`);
    fs.writeFileSync(target, renderFigure(spec));
    written.push(target);
  }
  return written;
}

function main(argv: string[]): number {
  if (argv.includes("--list")) {
    for (const name of Object.keys(RECIPES).sort()) console.log(name);
    return 0;
  }
  const positional: string[] = [];
  const opts: Record<string, string> = {};
  for (let i = 0; i < argv.length; i++) {
    if (argv[i].startsWith("--")) {
      opts[argv[i].slice(2)] = argv[++i];
    } else {
      positional.push(argv[i]);
    }
  }
  const opt = (name: string): string | undefined => opts[name];
  if (positional.length !== 1) usage();
  const root = opt("root");
  if (!root) usage();
  try {
    const written = buildRecipe(positional[0], root, opt("out") ?? "figures");
    for (const f of written) console.log(`wrote ${f}`);
    return 0;
  } catch (err) {
    console.error(`error: ${err instanceof Error ? err.message : err}`);
    return 1;
  }
}

if (process.argv[1] && /cli\.[jt]s$/.test(process.argv[1])) {
  process.exit(main(process.argv.slice(2)));
}
