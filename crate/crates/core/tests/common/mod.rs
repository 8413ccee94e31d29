//! Random mixed-model instances shared by the integration tests.

#![allow(dead_code)]

use blmm_core::block::Dense;
use blmm_core::{parse_formula, Column, DataTable, LinearMixedModel};
use rand::rngs::StdRng;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_distr::{Distribution, Normal};

pub struct Instance {
    pub formula: String,
    pub table: DataTable,
}

impl Instance {
    pub fn model(&self, sort: bool) -> LinearMixedModel {
        let f = parse_formula(&self.formula).expect("generated formula parses");
        LinearMixedModel::with_order(&f, &self.table, sort).expect("generated model builds")
    }
}

pub fn rng(seed: u64) -> StdRng {
    StdRng::seed_from_u64(seed)
}

fn level_refs(rng: &mut StdRng, n: usize, levels: usize) -> Vec<usize> {
    let mut refs: Vec<usize> = (0..n).map(|i| if i < levels { i } else { rng.gen_range(0..levels) }).collect();
    refs.shuffle(rng);
    refs
}

/// Up to three grouping factors with scalar or two-column terms, written in
/// every supported surface form.
pub fn random_instance(rng: &mut StdRng) -> Instance {
    let n = rng.gen_range(30..=200);
    let k = rng.gen_range(1..=3);
    let normal = Normal::new(0.0, 1.0).unwrap();
    let x1: Vec<f64> = (0..n).map(|_| normal.sample(rng)).collect();
    let x2: Vec<f64> = (0..n).map(|_| normal.sample(rng)).collect();
    let fixed = ["1", "1 + x1", "1 + x1 + x2", "0 + x1"][rng.gen_range(0..4)];
    let mut eta: Vec<f64> = (0..n).map(|i| 1.0 + 0.5 * x1[i] - 0.25 * x2[i]).collect();
    let mut terms = Vec::new();
    let mut columns = Vec::new();
    for g in 0..k {
        let name = format!("g{}", g + 1);
        let levels = rng.gen_range(2..=12.min(n));
        let refs = level_refs(rng, n, levels);
        let effects: Vec<(f64, f64)> = (0..levels).map(|_| (normal.sample(rng), 0.5 * normal.sample(rng))).collect();
        for i in 0..n {
            let (a, b) = effects[refs[i]];
            eta[i] += a + b * x2[i];
        }
        terms.push(match rng.gen_range(0..6) {
            0 | 1 => format!("(1|{name})"),
            2 => format!("(0 + x2|{name})"),
            3 => format!("(1 + x2|{name})"),
            4 => format!("zerocorr(1 + x2|{name})"),
            _ => format!("(1|{name}) + (0 + x2|{name})"),
        });
        let labels = refs.iter().map(|r| format!("L{r:02}")).collect();
        columns.push((name, Column::Categorical(labels)));
    }
    let y: Vec<f64> = eta.iter().map(|e| e + normal.sample(rng)).collect();
    columns.push(("x1".to_string(), Column::Numeric(x1)));
    columns.push(("x2".to_string(), Column::Numeric(x2)));
    columns.push(("y".to_string(), Column::Numeric(y)));
    Instance {
        formula: format!("y ~ {fixed} + {}", terms.join(" + ")),
        table: DataTable::new(columns).unwrap(),
    }
}

/// Random `θ` within the bounds; each diagonal entry is zero with
/// probability one in four.
pub fn random_theta(model: &LinearMixedModel, rng: &mut StdRng) -> Vec<f64> {
    model
        .theta_map()
        .positions()
        .iter()
        .map(|&(_, i, j)| {
            if i == j {
                if rng.gen_bool(0.25) {
                    0.0
                } else {
                    rng.gen_range(0.05..2.0)
                }
            } else {
                rng.gen_range(-1.0..1.0)
            }
        })
        .collect()
}

pub fn max_abs_diff(a: &Dense, b: &Dense) -> f64 {
    assert_eq!((a.nrows(), a.ncols()), (b.nrows(), b.ncols()));
    a.as_slice().iter().zip(b.as_slice()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

pub fn rel_diff(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1.0)
}
