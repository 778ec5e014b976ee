//! Budget-aware threshold surface `λ[t][b]` and its quantile calibration.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};

const MAGIC: &str = "corrsched-threshold-surface";
const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Default)]
pub struct CalibrationInfo {
    pub domain: String,
    pub seeds: Vec<u64>,
}

/// `λ[t][b]` for `t < T`, `b ≤ B`.
#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdSurface {
    horizon: usize,
    budget: usize,
    lambda: Vec<Vec<f64>>,
    pub info: CalibrationInfo,
}

/// Lower-interpolation quantile position `⌈q·n⌉ − 1` for `q = num/den`,
/// clamped to `[0, n)`. Integer arithmetic keeps hand examples exact.
fn lower_index(num: usize, den: usize, n: usize) -> usize {
    let k = (num * n).div_ceil(den);
    k.saturating_sub(1).min(n - 1)
}

impl ThresholdSurface {
    /// Calibrates from uncorrected defect traces: `λ[t][b]` is the
    /// `1 − b/(T−t)` quantile of all defects at steps `≥ t`, with `λ[t][0] = +∞`
    /// and `λ[t][b] = −∞` once `b ≥ T − t`.
    pub fn calibrate(traces: &[Vec<f64>], horizon: usize, budget: usize) -> Result<Self> {
        if traces.is_empty() {
            return Err(Error::Calibration("no calibration traces".into()));
        }
        if budget > horizon {
            return Err(Error::BudgetExceedsHorizon { budget, horizon });
        }
        if let Some(bad) = traces.iter().position(|s| s.len() != horizon) {
            return Err(Error::Calibration(format!(
                "trace {bad} has length {}, expected {horizon}",
                traces[bad].len()
            )));
        }
        if traces.iter().flatten().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::Calibration("defects must be finite and nonnegative".into()));
        }
        let mut lambda = vec![vec![0.0; budget + 1]; horizon];
        let mut pool: Vec<f64> = Vec::with_capacity(traces.len() * horizon);
        for t in (0..horizon).rev() {
            // grow S_{≥t} backwards, keeping it sorted
            let mut fresh: Vec<f64> = traces.iter().map(|s| s[t]).collect();
            fresh.sort_by(f64::total_cmp);
            pool = merge_sorted(&pool, &fresh);
            let left = horizon - t;
            let n = pool.len();
            for (b, cell) in lambda[t].iter_mut().enumerate() {
                *cell = if b == 0 {
                    f64::INFINITY
                } else if b >= left {
                    f64::NEG_INFINITY
                } else {
                    pool[lower_index(left - b, left, n)]
                };
            }
        }
        let s = ThresholdSurface {
            horizon,
            budget,
            lambda,
            info: CalibrationInfo::default(),
        };
        s.check()?;
        Ok(s)
    }

    /// Surface with every entry set to `value`. Used for the limiting
    /// schedules; does not satisfy the boundary conventions.
    pub fn filled(horizon: usize, budget: usize, value: f64) -> Self {
        ThresholdSurface {
            horizon,
            budget,
            lambda: vec![vec![value; budget + 1]; horizon],
            info: CalibrationInfo::default(),
        }
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn budget(&self) -> usize {
        self.budget
    }

    pub fn get(&self, t: usize, b: usize) -> f64 {
        self.lambda[t][b]
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.lambda
    }

    /// Same surface restricted to budgets `≤ budget`.
    pub fn truncate(&self, budget: usize) -> Result<Self> {
        if budget > self.budget {
            return Err(Error::BudgetExceedsHorizon {
                budget,
                horizon: self.budget,
            });
        }
        Ok(ThresholdSurface {
            horizon: self.horizon,
            budget,
            lambda: self.lambda.iter().map(|r| r[..=budget].to_vec()).collect(),
            info: self.info.clone(),
        })
    }

    /// Boundary conventions, nonnegativity and monotonicity in `b`.
    pub fn check(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Calibration(m));
        if self.lambda.len() != self.horizon {
            return fail("row count does not match horizon".into());
        }
        for (t, row) in self.lambda.iter().enumerate() {
            if row.len() != self.budget + 1 {
                return fail(format!("row {t} has {} columns", row.len()));
            }
            if row[0] != f64::INFINITY {
                return fail(format!("λ[{t}][0] is not +inf"));
            }
            for (b, &v) in row.iter().enumerate().skip(1) {
                if b >= self.horizon - t {
                    if v != f64::NEG_INFINITY {
                        return fail(format!("λ[{t}][{b}] must be -inf"));
                    }
                } else if !(v.is_finite() && v >= 0.0) {
                    return fail(format!("λ[{t}][{b}] = {v} is not a finite nonnegative value"));
                }
                if v > row[b - 1] {
                    return fail(format!("λ[{t}] increases at b = {b}"));
                }
            }
        }
        Ok(())
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{MAGIC} v{VERSION}");
        let _ = writeln!(out, "domain {}", self.info.domain);
        let _ = writeln!(out, "horizon {}", self.horizon);
        let _ = writeln!(out, "budget {}", self.budget);
        let _ = writeln!(out, "traces {}", self.info.seeds.len());
        let seeds: Vec<String> = self.info.seeds.iter().map(u64::to_string).collect();
        let _ = writeln!(out, "seeds {}", seeds.join(","));
        let _ = writeln!(out, "lambda");
        for row in &self.lambda {
            let cells: Vec<String> = row.iter().map(|v| format!("{v}")).collect();
            let _ = writeln!(out, "{}", cells.join(" "));
        }
        out
    }

    pub fn from_text(text: &str, origin: &str) -> Result<Self> {
        let bad = |reason: String| Error::Artifact {
            path: origin.to_string(),
            reason,
        };
        let mut lines = text.lines();
        let header = lines.next().ok_or_else(|| bad("empty file".into()))?;
        if header != format!("{MAGIC} v{VERSION}") {
            return Err(bad(format!("unsupported header `{header}`")));
        }
        let mut field = |key: &str| -> Result<String> {
            let line = lines.next().ok_or_else(|| bad(format!("missing `{key}`")))?;
            match line.split_once(' ') {
                Some((k, v)) if k == key => Ok(v.to_string()),
                None if line == key => Ok(String::new()),
                _ => Err(bad(format!("expected `{key}`, found `{line}`"))),
            }
        };
        let domain = field("domain")?;
        let num = |s: String, key: &str| s.parse::<usize>().map_err(|_| bad(format!("bad {key}")));
        let horizon = num(field("horizon")?, "horizon")?;
        let budget = num(field("budget")?, "budget")?;
        let count = num(field("traces")?, "traces")?;
        let seeds_line = field("seeds")?;
        let seeds: Vec<u64> = if seeds_line.is_empty() {
            Vec::new()
        } else {
            seeds_line
                .split(',')
                .map(|s| s.parse().map_err(|_| bad(format!("bad seed `{s}`"))))
                .collect::<Result<_>>()?
        };
        if seeds.len() != count {
            return Err(bad("seed count mismatch".into()));
        }
        if lines.next() != Some("lambda") {
            return Err(bad("missing lambda block".into()));
        }
        let mut lambda = Vec::with_capacity(horizon);
        for line in lines.by_ref().take(horizon) {
            let row: Vec<f64> = line
                .split(' ')
                .map(|s| s.parse().map_err(|_| bad(format!("bad value `{s}`"))))
                .collect::<Result<_>>()?;
            lambda.push(row);
        }
        if lines.any(|l| !l.trim().is_empty()) {
            return Err(bad("trailing data".into()));
        }
        let s = ThresholdSurface {
            horizon,
            budget,
            lambda,
            info: CalibrationInfo { domain, seeds },
        };
        s.check().map_err(|e| bad(e.to_string()))?;
        Ok(s)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            if e.kind() == std::io::ErrorKind::NotFound {
                Error::MissingArtifact(path.display().to_string())
            } else {
                Error::io(path, e)
            }
        })?;
        Self::from_text(&text, &path.display().to_string())
    }
}

fn merge_sorted(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(a.len() + b.len());
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        if a[i] <= b[j] {
            out.push(a[i]);
            i += 1;
        } else {
            out.push(b[j]);
            j += 1;
        }
    }
    out.extend_from_slice(&a[i..]);
    out.extend_from_slice(&b[j..]);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn four_step_hand_example() {
        let s = ThresholdSurface::calibrate(&[vec![1.0, 2.0, 3.0, 4.0]], 4, 1).unwrap();
        assert_eq!(s.get(0, 1), 3.0);
        assert_eq!(s.get(2, 1), 3.0);
        assert_eq!(s.get(3, 1), f64::NEG_INFINITY);
        for t in 0..4 {
            assert_eq!(s.get(t, 0), f64::INFINITY);
        }
        // t = 1: pool {2,3,4}, q = 2/3 -> index 1
        assert_eq!(s.get(1, 1), 3.0);
    }

    #[test]
    fn constant_pool_gives_constant_interior() {
        let traces = vec![vec![0.7; 10]; 3];
        let s = ThresholdSurface::calibrate(&traces, 10, 6).unwrap();
        for t in 0..10 {
            for b in 1..=6 {
                let expect = if b >= 10 - t { f64::NEG_INFINITY } else { 0.7 };
                assert_eq!(s.get(t, b), expect);
            }
        }
    }

    #[test]
    fn input_errors() {
        assert!(ThresholdSurface::calibrate(&[], 4, 1).is_err());
        assert!(ThresholdSurface::calibrate(&[vec![1.0; 3]], 4, 1).is_err());
        assert!(ThresholdSurface::calibrate(&[vec![1.0; 4]], 4, 5).is_err());
        assert!(ThresholdSurface::calibrate(&[vec![-1.0; 4]], 4, 1).is_err());
    }

    #[test]
    fn truncation_matches_direct_calibration() {
        let traces: Vec<Vec<f64>> = (0..4)
            .map(|i| (0..20).map(|t| ((i * 7 + t * 3) % 11) as f64).collect())
            .collect();
        let full = ThresholdSurface::calibrate(&traces, 20, 20).unwrap();
        let direct = ThresholdSurface::calibrate(&traces, 20, 5).unwrap();
        assert_eq!(full.truncate(5).unwrap(), direct);
    }

    #[test]
    fn text_round_trip_is_exact() {
        let traces = vec![vec![0.1, 0.2 + 0.1, 1e-300, 7.0, 0.0]];
        let mut s = ThresholdSurface::calibrate(&traces, 5, 3).unwrap();
        s.info = CalibrationInfo {
            domain: "so3".into(),
            seeds: vec![3, 9],
        };
        let back = ThresholdSurface::from_text(&s.to_text(), "mem").unwrap();
        assert_eq!(back, s);
        assert!(ThresholdSurface::from_text("garbage", "mem").is_err());
        let tampered = s.to_text().replace("corrsched-threshold-surface v1", "corrsched-threshold-surface v9");
        assert!(ThresholdSurface::from_text(&tampered, "mem").is_err());
    }

    #[test]
    fn missing_file_is_reported_as_missing_artifact() {
        let err = ThresholdSurface::load(Path::new("/nonexistent/surface.txt")).unwrap_err();
        assert!(matches!(err, Error::MissingArtifact(_)));
    }
}
