use alloc::string::String;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("syntax error at position {pos}: expected {expected}")]
    Syntax { pos: usize, expected: &'static str },
    #[error("formula has an empty right-hand side")]
    EmptyRhs,
    #[error("`|` outside parentheses at position {pos}")]
    BarOutsideParens { pos: usize },
    #[error("duplicate term `{0}`")]
    DuplicateTerm(String),
    #[error("random-effects term for `{0}` has no columns")]
    EmptyTerm(String),

    #[error("unknown column `{0}`")]
    UnknownColumn(String),
    #[error("column `{0}` is numeric and cannot be used as a grouping factor")]
    NumericGrouping(String),
    #[error("column `{0}` is categorical and cannot be used as a covariate or response")]
    CategoricalCovariate(String),
    #[error("column `{name}` has {len} rows, expected {expected}")]
    ColumnLength {
        name: String,
        len: usize,
        expected: usize,
    },
    #[error("data table has no rows")]
    EmptyTable,

    #[error("theta has length {got}, expected {expected}")]
    ThetaLength { got: usize, expected: usize },
    #[error("theta[{index}] = {value} is below its lower bound {bound}")]
    ThetaBound { index: usize, value: f64, bound: f64 },
    #[error("dimension mismatch: {0}")]
    Dimension(&'static str),
    #[error("level index out of range in grouping factor `{0}`")]
    RefOutOfRange(String),

    #[error("non-positive pivot {value:e} in diagonal block {block} at row {row}")]
    Breakdown { block: usize, row: usize, value: f64 },
    #[error("fixed-effects model matrix is rank deficient (column {0})")]
    RankDeficient(usize),
    #[error("factor is stale: update_l must run after set_theta")]
    StaleFactor,
    #[error("model has no random-effects terms")]
    NoRandomEffects,
    #[error("REML needs more observations ({n}) than fixed effects ({p})")]
    TooFewObservations { n: usize, p: usize },
    #[error("invalid option: {0}")]
    InvalidOption(&'static str),
}
