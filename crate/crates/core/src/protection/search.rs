// SPDX-License-Identifier: Apache-2.0

use std::cmp::Ordering;

use super::{EvaluatedConfig, ProtectionError, ProtectionProblem};

pub const DEFAULT_ENUMERATION_CAP: u64 = 1_000_000;

/// Relative slack for bounds compared against sums accumulated in a different order.
const SLACK: f64 = 1e-9;

/// Every assignment of `schemes` choices to `blocks` blocks, first block most significant.
pub fn enumerate_design_space(blocks: usize, schemes: usize, cap: u64) -> Result<Vec<Vec<usize>>, ProtectionError> {
    let size = (schemes as f64).powi(blocks as i32);
    if size > cap as f64 {
        return Err(ProtectionError::Capacity { size, cap });
    }
    if schemes == 0 {
        return Ok(Vec::new());
    }
    let total = size as usize;
    let mut out = Vec::with_capacity(total);
    let mut cur = vec![0usize; blocks];
    for _ in 0..total {
        out.push(cur.clone());
        for d in (0..blocks).rev() {
            cur[d] += 1;
            if cur[d] < schemes {
                break;
            }
            cur[d] = 0;
        }
    }
    Ok(out)
}

fn lex(a: &EvaluatedConfig, b: &EvaluatedConfig) -> Ordering {
    a.codes().cmp(&b.codes())
}

fn by_sdc(a: &EvaluatedConfig, b: &EvaluatedConfig) -> Ordering {
    a.sdc_npu
        .total_cmp(&b.sdc_npu)
        .then(a.total_area.total_cmp(&b.total_area))
        .then_with(|| lex(a, b))
}

fn by_area(a: &EvaluatedConfig, b: &EvaluatedConfig) -> Ordering {
    a.total_area
        .total_cmp(&b.total_area)
        .then(a.sdc_npu.total_cmp(&b.sdc_npu))
        .then_with(|| lex(a, b))
}

/// Points not dominated in (area, sdc), sorted by area then SDC.
pub fn pareto_frontier(points: &[EvaluatedConfig]) -> Result<Vec<EvaluatedConfig>, ProtectionError> {
    if points.is_empty() {
        return Err(ProtectionError::Domain("pareto frontier of an empty point set".into()));
    }
    let mut sorted: Vec<&EvaluatedConfig> = points.iter().collect();
    sorted.sort_by(|a, b| by_area(a, b));
    let mut out: Vec<EvaluatedConfig> = Vec::new();
    for p in sorted {
        let keep = match out.last() {
            None => true,
            Some(last) => {
                p.sdc_npu < last.sdc_npu || (p.sdc_npu == last.sdc_npu && p.total_area == last.total_area)
            }
        };
        if keep {
            out.push(p.clone());
        }
    }
    Ok(out)
}

fn all_points(problem: &ProtectionProblem) -> Result<Vec<EvaluatedConfig>, ProtectionError> {
    enumerate_design_space(problem.blocks.len(), problem.schemes.len(), DEFAULT_ENUMERATION_CAP)?
        .iter()
        .map(|c| problem.evaluate(c))
        .collect()
}

fn infeasible(problem: &ProtectionProblem, reason: String) -> ProtectionError {
    let frontier = all_points(problem)
        .and_then(|p| pareto_frontier(&p))
        .unwrap_or_default();
    ProtectionError::Infeasible { reason, frontier }
}

/// Suffix minima of added area and contribution, for bounding partial assignments.
fn suffix_min(problem: &ProtectionProblem) -> (Vec<f64>, Vec<f64>) {
    let n = problem.blocks.len();
    let mut area = vec![0.0; n + 1];
    let mut sdc = vec![0.0; n + 1];
    for b in (0..n).rev() {
        let row = &problem.options[b];
        area[b] = area[b + 1] + row.iter().map(|o| o.added_area).fold(f64::INFINITY, f64::min);
        sdc[b] = sdc[b + 1] + row.iter().map(|o| o.contribution).fold(f64::INFINITY, f64::min);
    }
    (area, sdc)
}

fn above(value: f64, bound: f64) -> bool {
    value > bound + SLACK * bound.abs().max(f64::MIN_POSITIVE)
}

struct Search<'a> {
    problem: &'a ProtectionProblem,
    rest_area: Vec<f64>,
    rest_sdc: Vec<f64>,
    choice: Vec<usize>,
    best: Option<EvaluatedConfig>,
}

impl Search<'_> {
    fn new(problem: &ProtectionProblem) -> Search<'_> {
        let (rest_area, rest_sdc) = suffix_min(problem);
        Search {
            problem,
            rest_area,
            rest_sdc,
            choice: Vec::with_capacity(problem.blocks.len()),
            best: None,
        }
    }

    /// Minimizes SDC subject to `baseline + added <= budget`.
    fn min_sdc(&mut self, depth: usize, added: f64, sdc: f64, budget: f64) {
        let p = self.problem;
        if above(p.baseline_area + added + self.rest_area[depth], budget) {
            return;
        }
        if let Some(best) = &self.best {
            if above(sdc + self.rest_sdc[depth], best.sdc_npu) {
                return;
            }
        }
        if depth == p.blocks.len() {
            let cand = p.finish(self.choice.clone(), added, sdc);
            if cand.total_area <= budget && self.best.as_ref().is_none_or(|b| by_sdc(&cand, b).is_lt()) {
                self.best = Some(cand);
            }
            return;
        }
        for (s, opt) in p.options[depth].iter().enumerate() {
            self.choice.push(s);
            self.min_sdc(depth + 1, added + opt.added_area, sdc + opt.contribution, budget);
            self.choice.pop();
        }
    }

    /// Minimizes area subject to `sdc < threshold`.
    fn min_area(&mut self, depth: usize, added: f64, sdc: f64, threshold: f64) {
        let p = self.problem;
        if above(sdc + self.rest_sdc[depth], threshold) {
            return;
        }
        if let Some(best) = &self.best {
            if above(p.baseline_area + added + self.rest_area[depth], best.total_area) {
                return;
            }
        }
        if depth == p.blocks.len() {
            let cand = p.finish(self.choice.clone(), added, sdc);
            if cand.sdc_npu < threshold && self.best.as_ref().is_none_or(|b| by_area(&cand, b).is_lt()) {
                self.best = Some(cand);
            }
            return;
        }
        for (s, opt) in p.options[depth].iter().enumerate() {
            self.choice.push(s);
            self.min_area(depth + 1, added + opt.added_area, sdc + opt.contribution, threshold);
            self.choice.pop();
        }
    }
}

/// Lowest-SDC assignment whose total area is within `budget`.
///
/// Ties go to the smaller area, then to the lexicographically smaller code vector.
pub fn optimize(problem: &ProtectionProblem, budget: f64) -> Result<EvaluatedConfig, ProtectionError> {
    if budget.is_nan() {
        return Err(ProtectionError::Domain("budget is NaN".into()));
    }
    let mut search = Search::new(problem);
    search.min_sdc(0, 0.0, 0.0, budget);
    search
        .best
        .ok_or_else(|| infeasible(problem, format!("no assignment fits an area budget of {budget}")))
}

/// Smallest-area assignment meeting the problem's target.
///
/// Ties go to the lower SDC, then to the lexicographically smaller code vector.
pub fn min_area(problem: &ProtectionProblem) -> Result<EvaluatedConfig, ProtectionError> {
    let threshold = problem
        .target
        .as_ref()
        .map(|t| t.threshold_per_inference)
        .ok_or_else(|| ProtectionError::Input("min_area needs a target".into()))?;
    let mut search = Search::new(problem);
    search.min_area(0, 0.0, 0.0, threshold);
    search
        .best
        .ok_or_else(|| infeasible(problem, format!("no assignment reaches SDC below {threshold:e}")))
}

/// Every assignment, evaluated, in enumeration order.
pub fn evaluate_all(problem: &ProtectionProblem) -> Result<Vec<EvaluatedConfig>, ProtectionError> {
    all_points(problem)
}
