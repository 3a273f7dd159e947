use std::path::PathBuf;

use crate::error::{Error, Result};
use crate::kernel::builtin_kernels;
use crate::problem::{FractionalOrder, ProblemSpec, RhsSpec};
use crate::solver::SolveConfig;

/// A parsed problem configuration: one `key = value` pair per line, `#`
/// starts a comment, no nesting. Required keys: kernel, a, b, alpha, beta,
/// u_a, rhs. Optional: rhs_params (comma-separated numbers), M, Mstar
/// (override the builtin Lipschitz constants), mesh_N, grading_r,
/// picard_tol, out.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub kernel: String,
    pub a: f64,
    pub b: f64,
    pub alpha: f64,
    pub beta: f64,
    pub u_a: f64,
    pub rhs: String,
    pub rhs_params: Vec<f64>,
    pub m: Option<f64>,
    pub mstar: Option<f64>,
    pub mesh_n: usize,
    pub grading_r: Option<f64>,
    pub picard_tol: f64,
    pub out: Option<PathBuf>,
}

const KNOWN_KEYS: [&str; 14] = [
    "kernel",
    "a",
    "b",
    "alpha",
    "beta",
    "u_a",
    "rhs",
    "rhs_params",
    "M",
    "Mstar",
    "mesh_N",
    "grading_r",
    "picard_tol",
    "out",
];

fn config_err(line: usize, message: impl Into<String>) -> Error {
    Error::Config {
        line,
        message: message.into(),
    }
}

fn parse_number(line: usize, key: &str, raw: &str) -> Result<f64> {
    raw.parse::<f64>()
        .map_err(|_| config_err(line, format!("key `{key}` expects a number, got `{raw}`")))
}

/// Parses the flat key-value config text. Unknown keys, duplicate keys,
/// malformed lines, and missing required keys are all reported with the
/// offending line number (0 for whole-file problems).
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let mut seen: Vec<(&str, usize, String)> = Vec::new();
    for (idx, raw_line) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw_line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(config_err(
                line_no,
                format!("expected `key = value`, got `{line}`"),
            ));
        };
        let key = key.trim();
        let value = value.trim();
        let Some(&canonical) = KNOWN_KEYS.iter().find(|&&k| k == key) else {
            return Err(config_err(
                line_no,
                format!(
                    "unknown key `{key}` (known keys: {})",
                    KNOWN_KEYS.join(", ")
                ),
            ));
        };
        if seen.iter().any(|(k, _, _)| *k == canonical) {
            return Err(config_err(line_no, format!("duplicate key `{key}`")));
        }
        if value.is_empty() {
            return Err(config_err(line_no, format!("key `{key}` has no value")));
        }
        // Validate the value's shape eagerly so the error carries this line
        // even when some required key is also missing.
        match canonical {
            "a" | "b" | "alpha" | "beta" | "u_a" | "M" | "Mstar" | "grading_r" | "picard_tol" => {
                parse_number(line_no, key, value)?;
            }
            "rhs_params" => {
                for piece in value.split(',') {
                    parse_number(line_no, "rhs_params", piece.trim())?;
                }
            }
            "mesh_N" => {
                value.parse::<usize>().map_err(|_| {
                    config_err(
                        line_no,
                        format!("key `mesh_N` expects a positive integer, got `{value}`"),
                    )
                })?;
            }
            _ => {}
        }
        seen.push((canonical, line_no, value.to_string()));
    }

    let lookup = |key: &str| seen.iter().find(|(k, _, _)| *k == key).cloned();
    let require = |key: &str| {
        lookup(key).ok_or_else(|| config_err(0, format!("missing required key `{key}`")))
    };

    let (_, kline, kernel) = require("kernel")?;
    let _ = kline;
    let number = |key: &str| -> Result<f64> {
        let (_, line, raw) = require(key)?;
        parse_number(line, key, &raw)
    };
    let a = number("a")?;
    let b = number("b")?;
    let alpha = number("alpha")?;
    let beta = number("beta")?;
    let u_a = number("u_a")?;
    let (_, _, rhs) = require("rhs")?;

    let rhs_params = match lookup("rhs_params") {
        None => Vec::new(),
        Some((_, line, raw)) => raw
            .split(',')
            .map(|piece| parse_number(line, "rhs_params", piece.trim()))
            .collect::<Result<Vec<f64>>>()?,
    };
    let optional_number = |key: &str| -> Result<Option<f64>> {
        match lookup(key) {
            None => Ok(None),
            Some((_, line, raw)) => parse_number(line, key, &raw).map(Some),
        }
    };
    let m = optional_number("M")?;
    let mstar = optional_number("Mstar")?;
    let grading_r = optional_number("grading_r")?;
    let mesh_n = match lookup("mesh_N") {
        None => SolveConfig::default().mesh_n,
        Some((_, line, raw)) => raw.parse::<usize>().map_err(|_| {
            config_err(
                line,
                format!("key `mesh_N` expects a positive integer, got `{raw}`"),
            )
        })?,
    };
    let picard_tol = match optional_number("picard_tol")? {
        None => SolveConfig::default().picard_tol,
        Some(v) => v,
    };
    let out = lookup("out").map(|(_, _, raw)| PathBuf::from(raw));

    Ok(RunConfig {
        kernel,
        a,
        b,
        alpha,
        beta,
        u_a,
        rhs,
        rhs_params,
        m,
        mstar,
        mesh_n,
        grading_r,
        picard_tol,
        out,
    })
}

/// Reads and parses a config file.
pub fn load_config(path: &std::path::Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path)?;
    parse_config(&text)
}

fn expect_params(kind: &str, params: &[f64], names: &[&str]) -> Result<()> {
    if params.len() != names.len() {
        return Err(Error::InvalidParameter(format!(
            "rhs `{kind}` expects rhs_params = {} ({} values), got {} values",
            names.join(","),
            names.len(),
            params.len()
        )));
    }
    Ok(())
}

impl RunConfig {
    /// Instantiates the right-hand side from its config name. The catalog is
    /// fixed so each entry carries exact Lipschitz constants:
    /// `power_source` (c,delta), `linear` (lambda), `implicit_contraction`
    /// (g0,c), and the bounded saturating demo `example5` (no parameters).
    pub fn rhs_spec(&self) -> Result<RhsSpec> {
        match self.rhs.as_str() {
            "power_source" => {
                expect_params("power_source", &self.rhs_params, &["c", "delta"])?;
                Ok(RhsSpec::PowerSource {
                    c: self.rhs_params[0],
                    delta: self.rhs_params[1],
                })
            }
            "linear" => {
                expect_params("linear", &self.rhs_params, &["lambda"])?;
                Ok(RhsSpec::LinearInU {
                    lambda: self.rhs_params[0],
                })
            }
            "implicit_contraction" => {
                expect_params("implicit_contraction", &self.rhs_params, &["g0", "c"])?;
                Ok(RhsSpec::ImplicitContraction {
                    g0: self.rhs_params[0],
                    c: self.rhs_params[1],
                })
            }
            "example5" => {
                expect_params("example5", &self.rhs_params, &[])?;
                Ok(RhsSpec::Saturating)
            }
            other => Err(Error::InvalidParameter(format!(
                "unknown rhs `{other}` (known: power_source, linear, implicit_contraction, example5)"
            ))),
        }
    }

    /// Builds the problem specification, applying any M/Mstar overrides on
    /// top of the catalog's automatic Lipschitz constants.
    pub fn build_problem(&self) -> Result<ProblemSpec> {
        let kernel = builtin_kernels(&self.kernel, self.a, self.b)?;
        let order = FractionalOrder::new(self.alpha, self.beta)?;
        let rhs = self.rhs_spec()?;
        let problem = ProblemSpec::new(kernel, order, self.u_a, rhs)?;
        if self.m.is_some() || self.mstar.is_some() {
            let m = self.m.unwrap_or_else(|| problem.lipschitz_m());
            let mstar = self.mstar.unwrap_or_else(|| problem.lipschitz_mstar());
            problem.with_lipschitz(m, mstar)
        } else {
            Ok(problem)
        }
    }

    /// Solver settings implied by the config (defaults where keys are absent).
    pub fn solve_config(&self) -> SolveConfig {
        SolveConfig {
            mesh_n: self.mesh_n,
            picard_tol: self.picard_tol,
            grading: self.grading_r,
            ..SolveConfig::default()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const DEMO: &str = "\
# saturating demo problem
kernel = sqrt_shift
a = 0
b = 1
alpha = 0.5
beta = 0.3333333333333333
u_a = 1
rhs = example5
mesh_N = 128
";

    #[test]
    fn demo_text_parses_and_builds() {
        let cfg = parse_config(DEMO).unwrap();
        assert_eq!(cfg.kernel, "sqrt_shift");
        assert_eq!(cfg.mesh_n, 128);
        assert!(cfg.out.is_none());
        let problem = cfg.build_problem().unwrap();
        assert_eq!(problem.lipschitz_m(), 0.1);
        assert_eq!(problem.lipschitz_mstar(), 0.1);
        assert_eq!(cfg.solve_config().picard_tol, 1e-10);
    }

    #[test]
    fn comments_and_blank_lines_are_ignored() {
        let text = format!("\n   # leading comment\n{DEMO}\nout = run.csv # trailing\n");
        let cfg = parse_config(&text).unwrap();
        assert_eq!(cfg.out.as_deref(), Some(std::path::Path::new("run.csv")));
    }

    #[test]
    fn unknown_keys_report_their_line() {
        let text = format!("{DEMO}bogus = 3\n");
        match parse_config(&text) {
            Err(Error::Config { line, message }) => {
                assert_eq!(line, 10);
                assert!(message.contains("bogus"), "{message}");
            }
            other => panic!("expected config error, got {other:?}"),
        }
    }

    #[test]
    fn duplicates_malformed_lines_and_bad_numbers_are_rejected() {
        assert!(matches!(
            parse_config(&format!("{DEMO}a = 0\n")),
            Err(Error::Config { .. })
        ));
        assert!(matches!(
            parse_config("kernel sqrt_shift\n"),
            Err(Error::Config { line: 1, .. })
        ));
        assert!(matches!(
            parse_config("a = fast\n"),
            Err(Error::Config { line: 1, .. })
        ));
        assert!(matches!(
            parse_config("mesh_N = 12.5\n"),
            Err(Error::Config { .. })
        ));
    }

    #[test]
    fn missing_required_keys_are_named() {
        match parse_config("kernel = linear\n") {
            Err(Error::Config { message, .. }) => assert!(message.contains('`'), "{message}"),
            other => panic!("expected config error, got {other:?}"),
        }
    }

    #[test]
    fn rhs_catalog_and_overrides_build() {
        let text = "\
kernel = linear
a = 0
b = 1
alpha = 0.5
beta = 1
u_a = 1
rhs = linear
rhs_params = 0.5
M = 0.6
";
        let cfg = parse_config(text).unwrap();
        let problem = cfg.build_problem().unwrap();
        assert_eq!(problem.lipschitz_m(), 0.6);
        assert_eq!(problem.lipschitz_mstar(), 0.0);
    }

    #[test]
    fn wrong_rhs_parameter_counts_are_rejected() {
        let text = "\
kernel = linear
a = 0
b = 1
alpha = 0.5
beta = 1
u_a = 1
rhs = power_source
rhs_params = 1
";
        let cfg = parse_config(text).unwrap();
        assert!(matches!(
            cfg.build_problem(),
            Err(Error::InvalidParameter(_))
        ));
    }

    #[test]
    fn dishonest_mstar_override_is_rejected_at_build() {
        let text = "\
kernel = linear
a = 0
b = 1
alpha = 0.5
beta = 1
u_a = 1
rhs = linear
rhs_params = 0.5
Mstar = 1
";
        let cfg = parse_config(text).unwrap();
        let err = cfg.build_problem().unwrap_err();
        assert_eq!(err.exit_code(), 1);
        assert!(err.to_string().contains("M*"), "{err}");
    }
}
