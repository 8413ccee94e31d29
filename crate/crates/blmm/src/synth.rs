//! Simulated data with two crossed grouping factors.

use std::io::Write;
use std::path::Path;

use blmm_core::{Column, DataTable};
use rand::rngs::StdRng;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_distr::{Distribution, Normal};

/// `y = 1 + a[g1] + b[g2] + ε`, with each observation's levels drawn
/// uniformly and every level used at least once.
#[derive(Debug, Clone, PartialEq)]
pub struct CrossedDesign {
    pub n: usize,
    pub levels_a: usize,
    pub levels_b: usize,
    pub sd_a: f64,
    pub sd_b: f64,
    pub sd_resid: f64,
    pub seed: u64,
}

impl CrossedDesign {
    pub fn new(n: usize, levels_a: usize, levels_b: usize, seed: u64) -> Self {
        CrossedDesign {
            n,
            levels_a,
            levels_b,
            sd_a: 0.5,
            sd_b: 0.8,
            sd_resid: 1.0,
            seed,
        }
    }

    pub const FORMULA: &'static str = "y ~ 1 + (1|a) + (1|b)";

    fn assignments(rng: &mut StdRng, n: usize, levels: usize) -> Vec<usize> {
        let mut refs: Vec<usize> = (0..n).map(|i| if i < levels { i } else { rng.gen_range(0..levels) }).collect();
        refs.shuffle(rng);
        refs
    }

    /// Columns `a`, `b` (categorical) and `y`. Panics if `n` is smaller
    /// than either level count.
    pub fn generate(&self) -> DataTable {
        assert!(self.n >= self.levels_a.max(self.levels_b), "every level needs an observation");
        let mut rng = StdRng::seed_from_u64(self.seed);
        let a = Self::assignments(&mut rng, self.n, self.levels_a);
        let b = Self::assignments(&mut rng, self.n, self.levels_b);
        let z = Normal::new(0.0, 1.0).unwrap();
        let ea: Vec<f64> = (0..self.levels_a).map(|_| self.sd_a * z.sample(&mut rng)).collect();
        let eb: Vec<f64> = (0..self.levels_b).map(|_| self.sd_b * z.sample(&mut rng)).collect();
        let y = (0..self.n).map(|i| 1.0 + ea[a[i]] + eb[b[i]] + self.sd_resid * z.sample(&mut rng)).collect();
        let wa = digits(self.levels_a);
        let wb = digits(self.levels_b);
        DataTable::new(vec![
            ("a".into(), Column::Categorical(a.iter().map(|l| format!("A{l:0wa$}")).collect())),
            ("b".into(), Column::Categorical(b.iter().map(|l| format!("B{l:0wb$}")).collect())),
            ("y".into(), Column::Numeric(y)),
        ])
        .expect("columns have equal length")
    }
}

fn digits(n: usize) -> usize {
    n.saturating_sub(1).to_string().len()
}

/// Writes a table as CSV with a header row.
pub fn write_csv(table: &DataTable, out: impl Write) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(table.names())?;
    let cols: Vec<&Column> = table.names().iter().map(|n| table.column(n).expect("named column")).collect();
    for i in 0..table.nrows() {
        let rec: Vec<String> = cols
            .iter()
            .map(|c| match c {
                Column::Numeric(v) => v[i].to_string(),
                Column::Categorical(v) => v[i].clone(),
            })
            .collect();
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

pub fn save_csv(table: &DataTable, path: impl AsRef<Path>) -> csv::Result<()> {
    let file = std::fs::File::create(path)?;
    write_csv(table, std::io::BufWriter::new(file))
}
