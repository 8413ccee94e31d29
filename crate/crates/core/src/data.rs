//! In-memory tables and the model matrices built from them.

use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::formula::{CorrMask, Formula, Regressor, TermSpec};

#[derive(Debug, Clone, PartialEq)]
pub enum Column {
    Numeric(Vec<f64>),
    Categorical(Vec<String>),
}

impl Column {
    pub fn len(&self) -> usize {
        match self {
            Column::Numeric(v) => v.len(),
            Column::Categorical(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Named, equal-length columns.
#[derive(Debug, Clone, PartialEq)]
pub struct DataTable {
    names: Vec<String>,
    columns: Vec<Column>,
    nrows: usize,
}

impl DataTable {
    pub fn new(columns: Vec<(String, Column)>) -> Result<Self> {
        let nrows = columns.first().map(|(_, c)| c.len()).unwrap_or(0);
        if nrows == 0 {
            return Err(Error::EmptyTable);
        }
        for (name, col) in &columns {
            if col.len() != nrows {
                return Err(Error::ColumnLength {
                    name: name.clone(),
                    len: col.len(),
                    expected: nrows,
                });
            }
        }
        let (names, columns) = columns.into_iter().unzip();
        Ok(DataTable {
            names,
            columns,
            nrows,
        })
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn column(&self, name: &str) -> Option<&Column> {
        self.names.iter().position(|n| n == name).map(|i| &self.columns[i])
    }

    fn numeric(&self, name: &str) -> Result<&[f64]> {
        match self.column(name) {
            Some(Column::Numeric(v)) => Ok(v),
            Some(Column::Categorical(_)) => Err(Error::CategoricalCovariate(name.to_string())),
            None => Err(Error::UnknownColumn(name.to_string())),
        }
    }

    fn categorical(&self, name: &str) -> Result<&[String]> {
        match self.column(name) {
            Some(Column::Categorical(v)) => Ok(v),
            Some(Column::Numeric(_)) => Err(Error::NumericGrouping(name.to_string())),
            None => Err(Error::UnknownColumn(name.to_string())),
        }
    }
}

/// Fixed-effects model matrix with the response appended as the last column.
/// Column-major, `n × (p + 1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct XyMat {
    n: usize,
    p: usize,
    names: Vec<String>,
    data: Vec<f64>,
}

impl XyMat {
    /// `columns` holds the `p` fixed-effects columns followed by the response.
    pub fn new(names: Vec<String>, columns: Vec<Vec<f64>>) -> Result<Self> {
        if columns.is_empty() || names.len() != columns.len() {
            return Err(Error::Dimension("XyMat needs one name per column and a response"));
        }
        let n = columns[0].len();
        if columns.iter().any(|c| c.len() != n) {
            return Err(Error::Dimension("XyMat columns differ in length"));
        }
        let p = columns.len() - 1;
        Ok(XyMat {
            n,
            p,
            names,
            data: columns.concat(),
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn p(&self) -> usize {
        self.p
    }

    /// Names of the fixed-effects columns, then the response.
    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn col(&self, j: usize) -> &[f64] {
        &self.data[j * self.n..(j + 1) * self.n]
    }

    pub fn response(&self) -> &[f64] {
        self.col(self.p)
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i + j * self.n]
    }
}

/// Random-effects structure for one grouping factor.
///
/// `refs` are zero-based level indices. `wide` holds the rows of the
/// per-level model matrix, `n × p` row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ReMat {
    pub grouping: String,
    pub refs: Vec<u32>,
    pub levels: Vec<String>,
    pub columns: Vec<Regressor>,
    pub wide: Vec<f64>,
    pub corr_mask: CorrMask,
}

impl ReMat {
    pub fn new(
        grouping: String,
        refs: Vec<u32>,
        levels: Vec<String>,
        columns: Vec<Regressor>,
        wide: Vec<f64>,
        corr_mask: CorrMask,
    ) -> Result<Self> {
        let p = columns.len();
        if p == 0 || corr_mask.dim() != p || wide.len() != refs.len() * p {
            return Err(Error::Dimension("ReMat columns, mask and wide matrix disagree"));
        }
        let mut seen = alloc::vec![false; levels.len()];
        for &r in &refs {
            match seen.get_mut(r as usize) {
                Some(s) => *s = true,
                None => return Err(Error::RefOutOfRange(grouping)),
            }
        }
        if seen.iter().any(|s| !s) {
            return Err(Error::Dimension("every level must occur at least once"));
        }
        Ok(ReMat {
            grouping,
            refs,
            levels,
            columns,
            wide,
            corr_mask,
        })
    }

    pub fn n(&self) -> usize {
        self.refs.len()
    }

    /// Columns per level.
    pub fn p(&self) -> usize {
        self.columns.len()
    }

    pub fn nlevels(&self) -> usize {
        self.levels.len()
    }

    /// Number of random effects, `levels × p`.
    pub fn q(&self) -> usize {
        self.nlevels() * self.p()
    }

    pub fn row(&self, obs: usize) -> &[f64] {
        let p = self.p();
        &self.wide[obs * p..(obs + 1) * p]
    }

    /// Scalar term whose only regressor is the intercept.
    pub fn is_indicator(&self) -> bool {
        self.columns == [Regressor::Intercept]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TermDims {
    pub p: usize,
    pub levels: usize,
    pub q: usize,
}

/// Sizes of the model components.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ModelDims {
    pub n: usize,
    pub p: usize,
    pub k: usize,
    pub terms: Vec<TermDims>,
    pub q: usize,
}

impl ModelDims {
    pub fn new(xy: &XyMat, rems: &[ReMat]) -> Self {
        let terms: Vec<TermDims> = rems
            .iter()
            .map(|r| TermDims {
                p: r.p(),
                levels: r.nlevels(),
                q: r.q(),
            })
            .collect();
        ModelDims {
            n: xy.n(),
            p: xy.p(),
            k: rems.len(),
            q: terms.iter().map(|t| t.q).sum(),
            terms,
        }
    }

    /// Order of the augmented Gram matrix, `q + p + 1`.
    pub fn augmented(&self) -> usize {
        self.q + self.p + 1
    }
}

fn regressor_values<'a>(table: &'a DataTable, r: &Regressor) -> Result<Option<&'a [f64]>> {
    match r {
        Regressor::Intercept => Ok(None),
        Regressor::Covariate(name) => table.numeric(name).map(Some),
    }
}

fn encode_levels(labels: &[String]) -> (Vec<u32>, Vec<String>) {
    let mut levels: Vec<&String> = labels.iter().collect();
    levels.sort_unstable();
    levels.dedup();
    let refs = labels
        .iter()
        .map(|l| levels.binary_search(&l).expect("label present") as u32)
        .collect();
    (refs, levels.into_iter().cloned().collect())
}

/// Evaluates the fixed-effects matrix, response and per-factor random-effects
/// structures. Levels of each grouping factor are ordered lexicographically.
/// The returned `ReMat`s follow the order of `specs`.
pub fn build_matrices(
    formula: &Formula,
    specs: &[TermSpec],
    table: &DataTable,
) -> Result<(XyMat, Vec<ReMat>, ModelDims)> {
    let n = table.nrows();

    let mut names = Vec::new();
    let mut cols = Vec::new();
    for r in formula.fixed_terms() {
        names.push(r.name().to_string());
        cols.push(match regressor_values(table, &r)? {
            Some(v) => v.to_vec(),
            None => alloc::vec![1.0; n],
        });
    }
    names.push(formula.response.clone());
    cols.push(table.numeric(&formula.response)?.to_vec());
    let xy = XyMat::new(names, cols)?;

    let mut rems = Vec::with_capacity(specs.len());
    for spec in specs {
        let labels = table.categorical(&spec.grouping)?;
        let values: Vec<Option<&[f64]>> = spec
            .columns
            .iter()
            .map(|r| regressor_values(table, r))
            .collect::<Result<_>>()?;
        let p = values.len();
        let mut wide = alloc::vec![0.0; n * p];
        for (o, row) in wide.chunks_exact_mut(p).enumerate() {
            for (slot, v) in row.iter_mut().zip(&values) {
                *slot = v.map_or(1.0, |v| v[o]);
            }
        }
        let (refs, levels) = encode_levels(labels);
        rems.push(ReMat::new(
            spec.grouping.clone(),
            refs,
            levels,
            spec.columns.clone(),
            wide,
            spec.corr_mask.clone(),
        )?);
    }
    let dims = ModelDims::new(&xy, &rems);
    Ok((xy, rems, dims))
}
