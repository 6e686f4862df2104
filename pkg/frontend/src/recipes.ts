/**
 * Figure recipes: which runs feed which paper-style figures.
 *
 * A recipe names the run directories (as produced by `byzrobust run --out`)
 * relative to a results root, and the panels built from their metrics.csv
 * files. Recipes only describe layout; all numbers come from the CSVs.
 */

import { MetricName } from "./schema.js";

export interface PanelRecipe {
  /** Output file stem, e.g. "same_value_accuracy" -> same_value_accuracy.svg */
  name: string;
  title: string;
  metric: MetricName;
  /** run-directory -> legend label */
  runs: Record<string, string>;
}

/** Accuracy + consensus-variance panel pair for one attack scenario. */
function scenarioPanels(scenario: string, title: string): PanelRecipe[] {
  const runs = {
    [`${scenario}_proposed`]: "penalty method",
    [`${scenario}_dpsgd`]: "neighbor averaging",
  };
  return [
    { name: `${scenario}_accuracy`, title: `${title}: accuracy`, metric: "accuracy", runs },
    {
      name: `${scenario}_variance`,
      title: `${title}: consensus variance`,
      metric: "consensus_variance",
      runs,
    },
  ];
}

export const RECIPES: Record<string, PanelRecipe[]> = {
  no_attack: scenarioPanels("no_attack", "No attack"),
  zero_sum: scenarioPanels("zero_sum", "Zero-sum attack"),
  same_value: scenarioPanels("same_value", "Same-value attack"),
  sign_flip: scenarioPanels("sign_flip", "Sign-flip attack"),
  lambda_sweep: [
    {
      name: "lambda_sweep_variance",
      title: "Impact of the penalty parameter",
      metric: "consensus_variance",
      runs: {
        "lambda_sweep/lam_0.0": "λ = 0",
        "lambda_sweep/lam_0.001": "λ = 0.001",
        "lambda_sweep/lam_0.01": "λ = 0.01",
        "lambda_sweep/lam_0.1": "λ = 0.1",
      },
    },
    {
      name: "lambda_sweep_accuracy",
      title: "Impact of the penalty parameter: accuracy",
      metric: "accuracy",
      runs: {
        "lambda_sweep/lam_0.0": "λ = 0",
        "lambda_sweep/lam_0.001": "λ = 0.001",
        "lambda_sweep/lam_0.01": "λ = 0.01",
        "lambda_sweep/lam_0.1": "λ = 0.1",
      },
    },
  ],
  time_varying: [
    {
      name: "time_varying_accuracy",
      title: "Random edge activation: accuracy",
      metric: "accuracy",
      runs: {
        time_varying_pe_0_01: "p_e = 0.01",
        time_varying_pe_0_005: "p_e = 0.005",
      },
    },
    {
      name: "time_varying_variance",
      title: "Random edge activation: consensus variance",
      metric: "consensus_variance",
      runs: {
        time_varying_pe_0_01: "p_e = 0.01",
        time_varying_pe_0_005: "p_e = 0.005",
      },
    },
  ],
};
