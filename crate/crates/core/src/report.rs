//! Tabular outputs and the diagnostics runner behind the command line.

use std::fmt;
use std::io::Write;

use serde::Serialize;

use crate::dist_reg::{bag_evaluator, ConditionalModel, Dataset, Model};
use crate::error::{Error, Result};
use crate::poly_basis::{BasisSpec, GramMatrix};
use crate::quadrature::QuadratureRule;

/// `|a - b| / max(|b|, tiny)`.
pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}

/// Largest entrywise difference relative to the largest entry of `reference`.
pub fn matrix_rel_err(a: &nalgebra::DMatrix<f64>, reference: &nalgebra::DMatrix<f64>) -> f64 {
    let scale = reference.amax().max(f64::MIN_POSITIVE);
    (a - reference).amax() / scale
}

/// `n` evenly spaced points on `[lo, hi]` (just `lo` when `n == 1`).
pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..n)
            .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
            .collect(),
    }
}

/// `n` points spanning the observed outcomes.
pub fn y_grid(ds: &Dataset, n: usize) -> Vec<f64> {
    let ys = ds.outcomes();
    let lo = ys.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = ys.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    linspace(lo, hi, n)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GridRow {
    pub x: f64,
    pub y: f64,
    pub lambda_cond: f64,
    pub lambda_uncond: f64,
    pub ratio: f64,
}

/// `lambda(y | x)`, `lambda(y)` and their ratio on a grid of outcomes.
pub fn run_eval_grid(
    model: &Model,
    unconditional: &ConditionalModel,
    x: f64,
    grid: &[f64],
) -> Result<Vec<GridRow>> {
    let cond = model.conditional(x)?;
    Ok(grid
        .iter()
        .map(|&y| {
            let lambda_cond = cond.lambda(y);
            let lambda_uncond = unconditional.lambda(y);
            GridRow {
                x,
                y,
                lambda_cond,
                lambda_uncond,
                ratio: lambda_cond / lambda_uncond,
            }
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct UncondRow {
    pub y: f64,
    pub lambda: f64,
}

pub fn run_uncond_grid(unconditional: &ConditionalModel, grid: &[f64]) -> Vec<UncondRow> {
    grid.iter()
        .map(|&y| UncondRow {
            y,
            lambda: unconditional.lambda(y),
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct QuadRow {
    pub x: f64,
    pub node: f64,
    pub weight: f64,
    pub probability: f64,
}

/// Outcome nodes, weights and probabilities at `x`.
pub fn run_quad(model: &Model, x: f64) -> Result<Vec<QuadRow>> {
    let dist = model.outcomes(x)?;
    Ok(dist
        .nodes
        .iter()
        .zip(&dist.weights)
        .zip(&dist.probabilities)
        .map(|((&node, &weight), &probability)| QuadRow {
            x,
            node,
            weight,
            probability,
        })
        .collect())
}

/// Writes rows as CSV (header from the field names) or JSONL.
pub fn write_rows<T: Serialize>(out: impl Write, rows: &[T], jsonl: bool) -> Result<()> {
    let io_err = |e: &dyn fmt::Display| Error::Io(e.to_string());
    if jsonl {
        let mut out = std::io::BufWriter::new(out);
        for row in rows {
            serde_json::to_writer(&mut out, row).map_err(|e| io_err(&e))?;
            writeln!(out)?;
        }
        out.flush()?;
    } else {
        let mut w = csv::Writer::from_writer(out);
        for row in rows {
            w.serialize(row).map_err(|e| io_err(&e))?;
        }
        w.flush()?;
    }
    Ok(())
}

/// Tolerances of the invariant suite.
pub const MASS_TOL: f64 = 1e-8;
pub const GRAM_TOL: f64 = 1e-10;
pub const REPRODUCING_TOL: f64 = 1e-8;
pub const WEIGHT_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckLine {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BagCondition {
    pub bag_id: String,
    pub condition: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckReport {
    pub bags: Vec<BagCondition>,
    pub dx_over_n: f64,
    pub dy_over_m: f64,
    pub warnings: Vec<String>,
    pub checks: Vec<CheckLine>,
}

impl CheckReport {
    pub fn passed(&self) -> bool {
        self.bags.iter().all(|b| b.error.is_none()) && self.checks.iter().all(|c| c.passed)
    }

    fn check(&mut self, name: impl Into<String>, err: f64, tol: f64) {
        self.checks.push(CheckLine {
            name: name.into(),
            passed: err <= tol,
            detail: format!("rel err {err:.3e} (tol {tol:.0e})"),
        });
    }

    fn fail(&mut self, name: impl Into<String>, detail: impl Into<String>) {
        self.checks.push(CheckLine {
            name: name.into(),
            passed: false,
            detail: detail.into(),
        });
    }
}

impl fmt::Display for CheckReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let conds: Vec<f64> = self.bags.iter().filter_map(|b| b.condition).collect();
        writeln!(f, "bags: {} ({} factorized)", self.bags.len(), conds.len())?;
        if !conds.is_empty() {
            let mut sorted = conds.clone();
            sorted.sort_by(f64::total_cmp);
            writeln!(
                f,
                "bag Gram condition estimate: min {:.3e} median {:.3e} max {:.3e}",
                sorted[0],
                sorted[sorted.len() / 2],
                sorted[sorted.len() - 1]
            )?;
            let mut worst: Vec<&BagCondition> =
                self.bags.iter().filter(|b| b.condition.is_some()).collect();
            worst.sort_by(|a, b| b.condition.unwrap().total_cmp(&a.condition.unwrap()));
            for b in worst.iter().take(5) {
                writeln!(f, "  bag {}: condition {:.3e}", b.bag_id, b.condition.unwrap())?;
            }
        }
        for b in self.bags.iter().filter(|b| b.error.is_some()) {
            writeln!(f, "FAIL bag {}: {}", b.bag_id, b.error.as_deref().unwrap_or(""))?;
        }
        writeln!(f, "overfit ratios: dx/N = {:.4}, dy/M = {:.4}", self.dx_over_n, self.dy_over_m)?;
        for w in &self.warnings {
            writeln!(f, "WARN {w}")?;
        }
        for c in &self.checks {
            let tag = if c.passed { "PASS" } else { "FAIL" };
            writeln!(f, "{tag} {}: {}", c.name, c.detail)?;
        }
        write!(f, "{}", if self.passed() { "all checks passed" } else { "some checks failed" })
    }
}

/// Largest relative deviation of `sum_l w_l K(z, y_l) P(y_l)` from `P(z)` over
/// the basis polynomials `P = Q_k` and the given probes.
pub fn reproducing_error(model: &ConditionalModel, ys: &[f64], probes: &[f64]) -> f64 {
    let spec: &BasisSpec = model.state().spec();
    let d = spec.degree();
    let qy: Vec<Vec<f64>> = ys.iter().map(|&y| spec.eval(y)).collect();
    let scale: Vec<f64> = (0..d)
        .map(|k| qy.iter().map(|q| q[k].abs()).fold(0.0, f64::max))
        .collect();
    let mut worst: f64 = 0.0;
    for &z in probes {
        let c = model.state().kernel_coefficients(z);
        let qz = spec.eval(z);
        let mut acc = vec![0.0; d];
        for (q, &w) in qy.iter().zip(model.weights()) {
            let k: f64 = c.iter().zip(q).map(|(a, b)| a * b).sum();
            for (a, qk) in acc.iter_mut().zip(q) {
                *a += w * k * qk;
            }
        }
        for k in 0..d {
            let err = (acc[k] - qz[k]).abs() / scale[k].max(qz[k].abs()).max(f64::MIN_POSITIVE);
            worst = worst.max(err);
        }
    }
    worst
}

/// Worst disagreement between the rule's weights and `lambda` at its nodes.
fn weight_consistency(model: &ConditionalModel, rule: &QuadratureRule) -> f64 {
    rule.nodes()
        .iter()
        .zip(rule.weights())
        .map(|(&y, &w)| rel_err(w, model.lambda(y)))
        .fold(0.0, f64::max)
}

/// Probes for the reproducing check: the measure's quadrature nodes and the
/// midpoints between them, where the measure carries its mass.
fn measure_checks(report: &mut CheckReport, label: &str, model: &ConditionalModel, ys: &[f64]) {
    let spec = model.state().spec();
    let direct = GramMatrix::direct(spec, ys, Some(model.weights()));
    report.check(
        format!("{label} Gram moments vs direct"),
        matrix_rel_err(model.gram().entries(), direct.entries()),
        GRAM_TOL,
    );
    match model.rule() {
        Ok(rule) => {
            let mut probes = rule.nodes().to_vec();
            probes.extend(rule.nodes().windows(2).map(|w| 0.5 * (w[0] + w[1])));
            report.check(
                format!("{label} reproducing property"),
                reproducing_error(model, ys, &probes),
                REPRODUCING_TOL,
            );
            let lambda_mass: f64 = rule.nodes().iter().map(|&y| model.lambda(y)).sum();
            report.check(
                format!("{label} mass identity"),
                rel_err(lambda_mass, model.total_weight()),
                MASS_TOL,
            );
            report.check(
                format!("{label} weight consistency"),
                weight_consistency(model, &rule),
                WEIGHT_TOL,
            );
        }
        Err(e) => report.fail(format!("{label} quadrature"), e.to_string()),
    }
}

/// Diagnostics for a dataset: per-bag conditioning, overfit ratios and the
/// invariant suite at the x probes. Failures are reported, never returned.
pub fn run_check(ds: &Dataset, probes: &[f64], ridge: Option<f64>) -> CheckReport {
    let (dx_over_n, dy_over_m) = ds.overfit_ratios();
    let mut report = CheckReport {
        bags: Vec::with_capacity(ds.bags().len()),
        dx_over_n,
        dy_over_m,
        warnings: ds.warnings(),
        checks: Vec::new(),
    };
    for bag in ds.bags() {
        let entry = match bag_evaluator(bag, ds.x_spec(), ridge) {
            Ok(ev) => BagCondition {
                bag_id: bag.id.clone(),
                condition: Some(ev.state().condition_estimate()),
                error: None,
            },
            Err(e) => BagCondition {
                bag_id: bag.id.clone(),
                condition: None,
                error: Some(match e {
                    Error::InsufficientRank { .. } => format!("InsufficientRank: {e}"),
                    other => other.to_string(),
                }),
            },
        };
        report.bags.push(entry);
    }

    let ys = ds.outcomes();
    match crate::dist_reg::unconditional_model(ds) {
        Ok(unc) => measure_checks(&mut report, "unconditional", &unc, &ys),
        Err(e) => report.fail("unconditional model", e.to_string()),
    }
    if report.bags.iter().any(|b| b.error.is_some()) {
        report.fail("conditional model", "skipped: some bags failed to factorize");
        return report;
    }
    let model = match Model::build(ds.clone(), ridge) {
        Ok(m) => m,
        Err(e) => {
            report.fail("conditional model", e.to_string());
            return report;
        }
    };
    for &x in probes {
        match model.conditional(x) {
            Ok(cond) => measure_checks(&mut report, &format!("x={x}"), &cond, &ys),
            Err(e) => report.fail(format!("x={x} conditional model"), e.to_string()),
        }
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dist_reg::{unconditional_model, Bag};
    use crate::poly_basis::BasisFamily;

    #[test]
    fn linspace_edges() {
        assert_eq!(linspace(0.0, 1.0, 1), vec![0.0]);
        assert_eq!(linspace(-1.0, 1.0, 5), vec![-1.0, -0.5, 0.0, 0.5, 1.0]);
        assert!(linspace(0.0, 1.0, 0).is_empty());
    }

    fn constant_dataset() -> Dataset {
        let bags = (0..6)
            .map(|i| Bag::new(format!("{i}"), vec![0.5; 4], -1.0 + 0.4 * i as f64))
            .collect();
        Dataset::fit(bags, BasisFamily::Chebyshev, 1, 3).unwrap()
    }

    #[test]
    fn ratio_is_bag_size_for_constant_weights() {
        let ds = constant_dataset();
        let model = Model::build(ds.clone(), None).unwrap();
        let unc = unconditional_model(&ds).unwrap();
        let rows = run_eval_grid(&model, &unc, 0.1, &y_grid(&ds, 11)).unwrap();
        assert_eq!(rows.len(), 11);
        for r in rows {
            assert!((r.ratio - 4.0).abs() < 4e-8, "{r:?}");
        }
        let one = run_eval_grid(&model, &unc, 0.1, &[0.0]).unwrap();
        assert_eq!(one.len(), 1);
    }

    #[test]
    fn csv_headers() {
        let row = GridRow {
            x: 0.0,
            y: 1.0,
            lambda_cond: 2.0,
            lambda_uncond: 3.0,
            ratio: 0.5,
        };
        let mut buf = Vec::new();
        write_rows(&mut buf, &[row], false).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("x,y,lambda_cond,lambda_uncond,ratio\n"), "{text}");
        let q = QuadRow {
            x: 0.0,
            node: 0.1,
            weight: 2.0,
            probability: 1.0,
        };
        let mut buf = Vec::new();
        write_rows(&mut buf, &[q], false).unwrap();
        assert!(buf.starts_with(b"x,node,weight,probability\n"));
        let mut buf = Vec::new();
        write_rows(&mut buf, &[q], true).unwrap();
        let v: serde_json::Value = serde_json::from_slice(&buf).unwrap();
        assert_eq!(v["probability"], 1.0);
    }

    #[test]
    fn check_flags_overfit_and_rank() {
        let mut bags: Vec<Bag> = (0..10)
            .map(|i| {
                let y = -1.0 + 0.2 * i as f64;
                Bag::new(format!("{i}"), vec![y - 0.1, y, y + 0.1, y + 0.05], y)
            })
            .collect();
        bags[3].xs = vec![0.0, 0.0, 1.0, 1.0];
        let ds = Dataset::fit(bags, BasisFamily::Chebyshev, 2, 2).unwrap();
        let rep = run_check(&ds, &[0.0], None);
        // dx/N = 0.5
        assert!(rep.warnings.iter().any(|w| w.contains("dx/N")));
        assert!(rep.passed(), "{rep}");

        let ds3 = Dataset::new(ds.bags().to_vec(), ds.x_spec().with_degree(3).unwrap(), *ds.y_spec())
            .unwrap();
        let rep = run_check(&ds3, &[0.0], None);
        assert!(!rep.passed());
        let text = rep.to_string();
        assert!(text.contains("FAIL bag 3: InsufficientRank"), "{text}");
    }
}
