//! Fit reports: a JSON document and the text display rendered from it.
//!
//! The text is a function of the document alone, so a report read back
//! from JSON renders to the same bytes.

use std::fmt::Write as _;

use blmm_core::block::Dense;
use blmm_core::{Criterion, FitResult, LinearMixedModel};
use serde::{Deserialize, Serialize};

/// Serializes non-finite values as the strings `"inf"`, `"-inf"`, `"NaN"`.
mod float {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else if v.is_nan() {
            s.serialize_str("NaN")
        } else if *v > 0.0 {
            s.serialize_str("inf")
        } else {
            s.serialize_str("-inf")
        }
    }

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Str(String),
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Num(v) => Ok(v),
            Repr::Str(s) => match s.as_str() {
                "inf" => Ok(f64::INFINITY),
                "-inf" => Ok(f64::NEG_INFINITY),
                "NaN" => Ok(f64::NAN),
                _ => Err(serde::de::Error::custom(format!("not a number: {s}"))),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TermReport {
    pub grouping: String,
    pub columns: Vec<String>,
    pub levels: usize,
    pub variance: Vec<f64>,
    pub std_dev: Vec<f64>,
    /// Strict lower triangle row by row; `null` where not estimated.
    pub corr: Vec<Option<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModesReport {
    pub grouping: String,
    pub columns: Vec<String>,
    pub levels: Vec<String>,
    /// One row per level.
    pub values: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub formula: String,
    /// `"ML"` or `"REML"`.
    pub criterion: String,
    #[serde(with = "float")]
    pub objective: f64,
    pub theta: Vec<f64>,
    pub coef_names: Vec<String>,
    pub beta: Vec<f64>,
    pub se: Vec<f64>,
    pub sigma: f64,
    pub varcorr: Vec<TermReport>,
    pub n: usize,
    pub ngroups: Vec<usize>,
    pub dof: usize,
    #[serde(with = "float")]
    pub aic: f64,
    #[serde(with = "float")]
    pub aicc: f64,
    #[serde(with = "float")]
    pub bic: f64,
    pub n_evals: usize,
    pub converged: bool,
    pub perfect_fit: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub modes: Option<Vec<ModesReport>>,
}

fn criterion_name(c: Criterion) -> &'static str {
    match c {
        Criterion::Ml => "ML",
        Criterion::Reml => "REML",
    }
}

impl FitReport {
    pub fn new(model: &LinearMixedModel, res: &FitResult) -> Self {
        FitReport {
            formula: model.formula().to_string(),
            criterion: criterion_name(res.criterion).to_string(),
            objective: res.objective,
            theta: res.theta.clone(),
            coef_names: res.coef_names.clone(),
            beta: res.beta.clone(),
            se: res.se.clone(),
            sigma: res.sigma(),
            varcorr: res
                .varcorr
                .iter()
                .map(|v| TermReport {
                    grouping: v.grouping.clone(),
                    columns: v.columns.clone(),
                    levels: v.levels,
                    variance: v.variance.clone(),
                    std_dev: v.std_dev.clone(),
                    corr: v.corr.clone(),
                })
                .collect(),
            n: res.n,
            ngroups: res.varcorr.iter().map(|v| v.levels).collect(),
            dof: res.dof,
            aic: res.aic,
            aicc: res.aicc,
            bic: res.bic,
            n_evals: res.n_evals,
            converged: res.converged,
            perfect_fit: res.perfect_fit,
            modes: None,
        }
    }

    /// Attaches conditional modes, one `levels × p` matrix per term in
    /// model order.
    pub fn with_modes(mut self, model: &LinearMixedModel, modes: &[Dense]) -> Self {
        self.modes = Some(
            model
                .reterms()
                .iter()
                .zip(modes)
                .map(|(re, b)| ModesReport {
                    grouping: re.grouping.clone(),
                    columns: re.columns.iter().map(|c| c.name().to_string()).collect(),
                    levels: re.levels.clone(),
                    values: (0..b.nrows()).map(|l| (0..b.ncols()).map(|c| b.get(l, c)).collect()).collect(),
                })
                .collect(),
        );
        self
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn from_json(text: &str) -> serde_json::Result<Self> {
        serde_json::from_str(text)
    }

    pub fn is_reml(&self) -> bool {
        self.criterion == "REML"
    }
}

/// `v` with seven significant digits, in positional notation where that
/// stays readable.
pub fn sig7(v: f64) -> String {
    if !v.is_finite() {
        return format!("{v}");
    }
    if v == 0.0 {
        return "0.0".to_string();
    }
    let mag = v.abs().log10().floor() as i32;
    if !(-5..=9).contains(&mag) {
        return format!("{v:.6e}");
    }
    let decimals = (6 - mag).max(0) as usize;
    format!("{v:.decimals$}")
}

/// Two-sided normal tail probability `P(|Z| > |z|)`.
fn p_value(z: f64) -> f64 {
    libm::erfc(z.abs() / std::f64::consts::SQRT_2)
}

fn format_p(p: f64) -> String {
    if p.is_nan() {
        "NaN".to_string()
    } else if p < 1e-99 {
        "<1e-99".to_string()
    } else if p < 1e-4 {
        format!("{p:.0e}")
    } else {
        format!("{p:.4}")
    }
}

/// Columns of text, left-aligned where `left[c]`, padded to equal width
/// and joined by two spaces. Trailing blanks are trimmed.
fn table(rows: &[Vec<String>], left: &[bool]) -> String {
    let ncol = rows.iter().map(Vec::len).max().unwrap_or(0);
    let width: Vec<usize> = (0..ncol)
        .map(|c| rows.iter().filter_map(|r| r.get(c)).map(|s| s.chars().count()).max().unwrap_or(0))
        .collect();
    let mut out = String::new();
    for r in rows {
        let mut line = String::new();
        for c in 0..ncol {
            let cell = r.get(c).map(String::as_str).unwrap_or("");
            if c > 0 {
                line.push_str("  ");
            }
            if left.get(c).copied().unwrap_or(false) {
                let _ = write!(line, "{cell:<w$}", w = width[c]);
            } else {
                let _ = write!(line, "{cell:>w$}", w = width[c]);
            }
        }
        out.push_str(line.trim_end());
        out.push('\n');
    }
    out
}

/// The text display of a fit.
pub fn render(r: &FitReport) -> String {
    let mut out = String::new();
    let how = if r.is_reml() { "REML" } else { "maximum likelihood" };
    let _ = writeln!(out, "Linear mixed model fit by {how}");
    let _ = writeln!(out, " {}", r.formula);
    if r.is_reml() {
        let _ = writeln!(out, " REML criterion at convergence: {}", r.objective);
    } else {
        let head = ["logLik", "-2 logLik", "AIC", "AICc", "BIC"].map(String::from).to_vec();
        let vals = [-r.objective / 2.0, r.objective, r.aic, r.aicc, r.bic].map(|v| format!("{v:.4}")).to_vec();
        for line in table(&[head, vals], &[false; 5]).lines() {
            let _ = writeln!(out, " {line}");
        }
    }
    out.push('\n');

    out.push_str("Variance components:\n");
    let mut rows = vec![["", "Column", "Variance", "Std.Dev.", "Corr."].map(String::from).to_vec()];
    for t in &r.varcorr {
        for (i, col) in t.columns.iter().enumerate() {
            let mut row = vec![
                if i == 0 { t.grouping.clone() } else { String::new() },
                col.clone(),
                sig7(t.variance[i]),
                sig7(t.std_dev[i]),
            ];
            for j in 0..i {
                row.push(match t.corr[i * (i - 1) / 2 + j] {
                    Some(c) => format!("{c:+.7}"),
                    None => ".".to_string(),
                });
            }
            rows.push(row);
        }
    }
    rows.push(vec![
        "Residual".into(),
        String::new(),
        sig7(r.sigma * r.sigma),
        sig7(r.sigma),
    ]);
    out.push_str(&table(&rows, &[true, true, false, false, false]));
    let groups: Vec<String> = r.ngroups.iter().map(usize::to_string).collect();
    let _ = writeln!(out, " Number of obs: {}; levels of grouping factors: {}", r.n, groups.join(", "));
    out.push('\n');

    out.push_str("Fixed-effects parameters:\n");
    let mut rows = vec![["", "Coef.", "Std. Error", "z", "Pr(>|z|)"].map(String::from).to_vec()];
    for (k, name) in r.coef_names.iter().enumerate() {
        let z = r.beta[k] / r.se[k];
        rows.push(vec![name.clone(), sig7(r.beta[k]), sig7(r.se[k]), format!("{z:.2}"), format_p(p_value(z))]);
    }
    out.push_str(&table(&rows, &[true, false, false, false, false]));

    if r.is_reml() {
        let _ = writeln!(out, "\n AIC {:.4}  AICc {:.4}  BIC {:.4}  (REML criterion)", r.aic, r.aicc, r.bic);
    }
    let status = if r.converged { "converged" } else { "did not converge" };
    let _ = writeln!(out, "\n {} evaluations, {status}", r.n_evals);
    if r.perfect_fit {
        out.push_str(" warning: the residual sum of squares is zero (perfect fit)\n");
    }

    if let Some(modes) = &r.modes {
        for m in modes {
            let _ = writeln!(out, "\nConditional modes for {}:", m.grouping);
            let mut rows = vec![std::iter::once(String::new()).chain(m.columns.iter().cloned()).collect::<Vec<_>>()];
            for (level, vals) in m.levels.iter().zip(&m.values) {
                rows.push(std::iter::once(level.clone()).chain(vals.iter().map(|v| sig7(*v))).collect());
            }
            let mut left = vec![true];
            left.extend(std::iter::repeat_n(false, m.columns.len()));
            out.push_str(&table(&rows, &left));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> FitReport {
        FitReport {
            formula: "y ~ 1 + x + (1 + x | g)".into(),
            criterion: "ML".into(),
            objective: 237648.60164786,
            theta: vec![0.5, 0.1, 0.2],
            coef_names: vec!["(Intercept)".into(), "x".into()],
            beta: vec![3.2776525, -0.0507433],
            se: vec![0.0235032, 0.0439878],
            sigma: 1.1768639,
            varcorr: vec![TermReport {
                grouping: "g".into(),
                columns: vec!["(Intercept)".into(), "x".into()],
                levels: 14,
                variance: vec![0.00258, 0.0233987],
                std_dev: vec![0.00258f64.sqrt(), 0.0233987f64.sqrt()],
                corr: vec![None],
            }],
            n: 73421,
            ngroups: vec![14],
            dof: 6,
            aic: 237662.6016,
            aicc: 237662.6032,
            bic: 237727.0294,
            n_evals: 180,
            converged: true,
            perfect_fit: false,
            modes: None,
        }
    }

    #[test]
    fn significant_digits() {
        assert_eq!(sig7(1.3850086), "1.385009");
        assert_eq!(sig7(0.0025800), "0.002580000");
        assert_eq!(sig7(237648.6016), "237648.6");
        assert_eq!(sig7(-0.0507433), "-0.05074330");
        assert_eq!(sig7(0.0), "0.0");
        assert_eq!(sig7(1.5e-12), "1.500000e-12");
    }

    #[test]
    fn p_values() {
        assert!((p_value(1.959963984540054) - 0.05).abs() < 1e-12);
        assert_eq!(format_p(p_value(139.0)), "<1e-99");
        assert_eq!(format_p(0.24871), "0.2487");
        assert_eq!(format_p(3.2e-7), "3e-7");
    }

    #[test]
    fn masked_correlation_is_a_dot() {
        let text = render(&sample());
        let line = text.lines().find(|l| l.trim_start().starts_with("x ")).unwrap();
        assert!(line.ends_with('.'), "{line}");
        assert!(text.contains("Number of obs: 73421; levels of grouping factors: 14"));
        assert!(text.contains("237648.6016"));
        assert!(text.contains("Std. Error"));
    }

    #[test]
    fn json_round_trip_renders_identically() {
        let mut r = sample();
        r.varcorr[0].corr = vec![Some(-0.123456789)];
        let back = FitReport::from_json(&r.to_json()).unwrap();
        assert_eq!(back, r);
        assert_eq!(render(&back), render(&r));
    }

    #[test]
    fn infinite_objective_survives_json() {
        let mut r = sample();
        r.objective = f64::INFINITY;
        r.aic = f64::INFINITY;
        r.perfect_fit = true;
        let back = FitReport::from_json(&r.to_json()).unwrap();
        assert_eq!(back.objective, f64::INFINITY);
        assert!(render(&back).contains("perfect fit"));
    }

    #[test]
    fn reml_header() {
        let mut r = sample();
        r.criterion = "REML".into();
        r.objective = 237658.60945245498;
        let text = render(&r);
        assert!(text.contains("REML criterion at convergence: 237658.609"));
        assert!(text.starts_with("Linear mixed model fit by REML"));
    }
}
