use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use super::InterpretError;

/// Two-sample Welch t-test (unequal sizes and variances), two-tailed.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WelchResult {
    pub t: f64,
    /// Welch–Satterthwaite degrees of freedom.
    pub df: f64,
    pub p: f64,
    pub n1: usize,
    pub mean1: f64,
    pub var1: f64,
    pub n2: usize,
    pub mean2: f64,
    pub var2: f64,
}

fn mean_var(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let ss = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>();
    (mean, ss / (n - 1.0))
}

pub fn welch_ttest(group1: &[f64], group2: &[f64]) -> Result<WelchResult, InterpretError> {
    for (group, xs) in [(1, group1), (2, group2)] {
        if xs.len() < 2 {
            return Err(InterpretError::TooFewScores { group, n: xs.len() });
        }
        if xs.iter().any(|x| !x.is_finite()) {
            return Err(InterpretError::NonFinite);
        }
    }
    let (n1, n2) = (group1.len() as f64, group2.len() as f64);
    let (mean1, var1) = mean_var(group1);
    let (mean2, var2) = mean_var(group2);
    if var1 == 0.0 && var2 == 0.0 {
        return Err(InterpretError::ZeroVariance);
    }
    let (a, b) = (var1 / n1, var2 / n2);
    let se2 = a + b;
    let t = (mean1 - mean2) / se2.sqrt();
    let df = se2 * se2 / (a * a / (n1 - 1.0) + b * b / (n2 - 1.0));
    let dist = StudentsT::new(0.0, 1.0, df).expect("df is positive and finite");
    let p = (2.0 * dist.cdf(-t.abs())).clamp(0.0, 1.0);
    Ok(WelchResult {
        t,
        df,
        p,
        n1: group1.len(),
        mean1,
        var1,
        n2: group2.len(),
        mean2,
        var2,
    })
}

/// Row labels of the t-test summary, in print order.
pub const TTEST_ROWS: [&str; 7] = [
    "t-statistic",
    "Degree of freedom",
    "Mean of scores in group 1",
    "Variance of scores in group 1",
    "Mean of scores in group 2",
    "Variance of scores in group 2",
    "p-value",
];

/// One column per labeled result; group 1 is independent claims, group 2
/// dependent claims.
pub fn render_ttest_table(columns: &[(&str, WelchResult)], delimiter: char) -> String {
    let d = delimiter;
    let mut out = String::new();
    for (name, _) in columns {
        out.push(d);
        out.push_str(name);
    }
    out.push('\n');
    for (row, label) in TTEST_ROWS.iter().enumerate() {
        out.push_str(label);
        for (_, r) in columns {
            let cell = match row {
                0 => format!("{:.2}", r.t),
                1 => format!("{:.0}", r.df),
                2 => format!("{:.4}", r.mean1),
                3 => format!("{:.4}", r.var1),
                4 => format!("{:.4}", r.mean2),
                5 => format!("{:.4}", r.var2),
                _ => format!("{:.4}", r.p),
            };
            out.push(d);
            out.push_str(&cell);
        }
        out.push('\n');
    }
    out
}
