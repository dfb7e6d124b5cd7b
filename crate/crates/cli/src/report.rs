//! Deterministic report rendering. Reports never embed timestamps or
//! machine-dependent state, keys appear in a fixed order, and every float is
//! written with 17 significant digits, so identical configurations yield
//! byte-identical output.

use std::fmt::Write as _;

use matlrt::lrt::TestSpec;
use matlrt::{PowerPoint, TestResult};
use nalgebra::DVector;

pub const SCHEMA_VERSION: u32 = 1;

/// 17 significant digits: enough to round-trip any f64.
fn num(x: f64) -> String {
    format!("{x:.16e}")
}

fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            c if (c as u32) < 0x20 => {
                let _ = write!(out, "\\u{:04x}", c as u32);
            }
            c => out.push(c),
        }
    }
    out
}

fn spec_json(spec: &TestSpec, indent: &str) -> String {
    format!(
        "{{\n{indent}  \"m\": {},\n{indent}  \"p\": {},\n{indent}  \"missing_diagonal\": {},\n\
         {indent}  \"heteroscedastic\": {},\n{indent}  \"s\": {},\n{indent}  \"seed\": {}\n{indent}}}",
        spec.m, spec.p, spec.missing_diagonal, spec.heteroscedastic, spec.s, spec.seed
    )
}

fn preamble(command: &str, version: &str) -> String {
    format!(
        "{{\n  \"schema_version\": {SCHEMA_VERSION},\n  \"tool_version\": \"{}\",\n  \
         \"command\": \"{command}\",\n",
        escape(version)
    )
}

pub fn test_report(result: &TestResult, level: f64, input: &str, version: &str) -> String {
    let mut out = preamble("test", version);
    let _ = write!(
        out,
        "  \"input\": \"{}\",\n  \"spec\": {},\n  \"level\": {},\n  \"statistic\": {},\n  \
         \"p_value\": {},\n  \"quantile_95\": {},\n  \"reject\": {},\n  \"approximate_null\": {},\n  \
         \"cache_hit\": {},\n  \"null_sample\": {{\n    \"count\": {},\n    \"mean\": {},\n    \
         \"sd\": {}\n  }}\n}}\n",
        escape(input),
        spec_json(&result.spec, "  "),
        num(level),
        num(result.statistic),
        num(result.p_value),
        num(result.quantile_95),
        result.p_value < level,
        result.approximate_null,
        result.cache_hit,
        result.null_sample_summary.count,
        num(result.null_sample_summary.mean),
        num(result.null_sample_summary.sd),
    );
    out
}

pub fn null_report(
    spec: &TestSpec,
    cache_file: &str,
    quantile_95: f64,
    preexisting: bool,
    version: &str,
) -> String {
    let mut out = preamble("null", version);
    let _ = write!(
        out,
        "  \"spec\": {},\n  \"cache_file\": \"{}\",\n  \"preexisting\": {preexisting},\n  \
         \"quantile_95\": {}\n}}\n",
        spec_json(spec, "  "),
        escape(cache_file),
        num(quantile_95),
    );
    out
}

pub fn demean_report(
    names: &[String],
    beta: &DVector<f64>,
    m: usize,
    p: usize,
    missing_diagonal: bool,
    output: &str,
    version: &str,
) -> String {
    let mut out = preamble("demean", version);
    let _ = write!(
        out,
        "  \"data\": {{ \"m\": {m}, \"p\": {p}, \"missing_diagonal\": {missing_diagonal} }},\n  \
         \"output\": \"{}\",\n  \"coefficients\": [\n",
        escape(output)
    );
    for (idx, (name, b)) in names.iter().zip(beta.iter()).enumerate() {
        let comma = if idx + 1 < names.len() { "," } else { "" };
        let _ = writeln!(
            out,
            "    {{ \"name\": \"{}\", \"estimate\": {} }}{comma}",
            escape(name),
            num(*b)
        );
    }
    out.push_str("  ]\n}\n");
    out
}

pub fn power_csv(points: &[PowerPoint], level: f64) -> String {
    let mut out = String::from("kind,params,m,level,n_reps,rejections,power,mc_se\n");
    for pt in points {
        let params: Vec<String> = pt
            .alt
            .params()
            .iter()
            .map(|(name, value)| format!("{name}={value}"))
            .collect();
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            pt.alt.kind(),
            params.join(";"),
            pt.alt.m(),
            level,
            pt.n_reps,
            pt.rejections,
            num(pt.power),
            num(pt.mc_se),
        );
    }
    out
}

pub fn eigen_csv(draws: &[(f64, f64)]) -> String {
    let mut out = String::from("draw,statistic,p_value\n");
    for (idx, (t, p)) in draws.iter().enumerate() {
        let _ = writeln!(out, "{},{},{}", idx + 1, num(*t), num(*p));
    }
    out
}
