//! Serialisable experiment reports: JSON, CSV and a native SVG plot.

use std::fmt::Write as _;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats::fit::RateFit;

/// Statistics of `F_R(t)` at one radius.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadiusRecord {
    pub r: f64,
    pub n: usize,
    pub sigma2: f64,
    pub sigma2_se: f64,
    pub ks: f64,
    pub tv_proxy: f64,
    pub skewness: f64,
    pub excess_kurtosis: f64,
    /// Variance of the normalised mean `R^{-d} F_R(t)`.
    pub mean_variance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CltReport {
    pub dim: usize,
    pub t: f64,
    pub records: Vec<RadiusRecord>,
    /// Fitted exponent of the KS distance in R.
    pub slope: f64,
    pub slope_se: f64,
    pub r_squared: f64,
    pub tv_slope: f64,
    pub tv_slope_se: f64,
    /// Mean and spread of the KS distance of exact Gaussian samples of the
    /// same size.
    pub ks_baseline: f64,
    pub ks_baseline_sd: f64,
    /// `ω_d c² ‖γ‖₁ t³/3` when σ ≡ c.
    pub limit_variance_target: Option<f64>,
    /// `σ_R²/R^d` at the largest radius.
    pub limit_variance_estimate: f64,
}

impl CltReport {
    pub fn ks_fit(&self) -> RateFit {
        RateFit {
            slope: self.slope,
            stderr: self.slope_se,
            intercept: fit_intercept(&self.records, |r| r.ks),
            r_squared: self.r_squared,
            r_list: self.records.iter().map(|r| r.r).collect(),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Format(e.to_string()))
    }

    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| Error::Format(e.to_string()))
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "r,n,sigma2,sigma2_se,ks,tv_proxy,skewness,excess_kurtosis,mean_variance")?;
        for r in &self.records {
            writeln!(
                w,
                "{},{},{},{},{},{},{},{},{}",
                r.r, r.n, r.sigma2, r.sigma2_se, r.ks, r.tv_proxy, r.skewness, r.excess_kurtosis, r.mean_variance
            )?;
        }
        Ok(())
    }

    /// Log-log plot of KS and TV proxy against R with the fitted KS line.
    pub fn to_svg(&self) -> String {
        let ks: Vec<(f64, f64)> = self.records.iter().map(|r| (r.r, r.ks)).collect();
        let tv: Vec<(f64, f64)> = self.records.iter().map(|r| (r.r, r.tv_proxy)).collect();
        let intercept = fit_intercept(&self.records, |r| r.ks);
        loglog_svg(
            "distance to N(0,1) vs R",
            "R",
            "distance",
            &[("ks", "#1f77b4", &ks), ("tv proxy", "#d62728", &tv)],
            Some((self.slope, intercept)),
        )
    }
}

fn fit_intercept(records: &[RadiusRecord], f: impl Fn(&RadiusRecord) -> f64) -> f64 {
    let pts: Vec<(f64, f64)> = records
        .iter()
        .filter(|r| f(r) > 0.0)
        .map(|r| (r.r.ln(), f(r).ln()))
        .collect();
    if pts.len() < 2 {
        return 0.0;
    }
    let x: Vec<f64> = pts.iter().map(|p| p.0).collect();
    let y: Vec<f64> = pts.iter().map(|p| p.1).collect();
    crate::stats::fit::least_squares(&x, &y).1
}

/// Minimal log-log scatter plot with an optional fitted line
/// `log y = slope·log x + intercept`.
pub fn loglog_svg(
    title: &str,
    xlabel: &str,
    ylabel: &str,
    series: &[(&str, &str, &[(f64, f64)])],
    line: Option<(f64, f64)>,
) -> String {
    let (w, h, m) = (640.0, 440.0, 60.0);
    let pts: Vec<(f64, f64)> = series
        .iter()
        .flat_map(|s| s.2.iter().copied())
        .filter(|p| p.0 > 0.0 && p.1 > 0.0)
        .map(|(x, y)| (x.log10(), y.log10()))
        .collect();
    let (mut x0, mut x1, mut y0, mut y1) = pts.iter().fold(
        (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY),
        |a, p| (a.0.min(p.0), a.1.max(p.0), a.2.min(p.1), a.3.max(p.1)),
    );
    if !x0.is_finite() {
        (x0, x1, y0, y1) = (0.0, 1.0, 0.0, 1.0);
    }
    let padx = 0.05 * (x1 - x0).max(0.1);
    let pady = 0.1 * (y1 - y0).max(0.1);
    let (x0, x1, y0, y1) = (x0 - padx, x1 + padx, y0 - pady, y1 + pady);
    let sx = |x: f64| m + (x - x0) / (x1 - x0) * (w - 2.0 * m);
    let sy = |y: f64| h - m - (y - y0) / (y1 - y0) * (h - 2.0 * m);
    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#
    );
    let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        out,
        r#"<rect x="{m}" y="{m}" width="{}" height="{}" fill="none" stroke="black"/>"#,
        w - 2.0 * m,
        h - 2.0 * m
    );
    let _ = writeln!(out, r#"<text x="{}" y="30" text-anchor="middle" font-size="16">{}</text>"#, w / 2.0, escape(title));
    let _ = writeln!(
        out,
        r#"<text x="{}" y="{}" text-anchor="middle" font-size="13">log10 {}</text>"#,
        w / 2.0,
        h - 15.0,
        escape(xlabel)
    );
    let _ = writeln!(
        out,
        r#"<text x="18" y="{}" text-anchor="middle" font-size="13" transform="rotate(-90 18 {})">log10 {}</text>"#,
        h / 2.0,
        h / 2.0,
        escape(ylabel)
    );
    for k in 0..=4 {
        let fx = x0 + (x1 - x0) * k as f64 / 4.0;
        let fy = y0 + (y1 - y0) * k as f64 / 4.0;
        let _ = writeln!(out, r#"<text x="{:.1}" y="{}" text-anchor="middle" font-size="11">{fx:.2}</text>"#, sx(fx), h - m + 16.0);
        let _ = writeln!(out, r#"<text x="{}" y="{:.1}" text-anchor="end" font-size="11">{fy:.2}</text>"#, m - 6.0, sy(fy) + 4.0);
    }
    if let Some((slope, intercept)) = line {
        // intercept is in natural logs
        let f = |lx: f64| (slope * lx * std::f64::consts::LN_10 + intercept) / std::f64::consts::LN_10;
        let _ = writeln!(
            out,
            r#"<line x1="{:.1}" y1="{:.1}" x2="{:.1}" y2="{:.1}" stroke="gray" stroke-dasharray="5,4"/>"#,
            sx(x0),
            sy(f(x0)),
            sx(x1),
            sy(f(x1))
        );
    }
    for (i, (name, colour, data)) in series.iter().enumerate() {
        for &(x, y) in data.iter() {
            if x > 0.0 && y > 0.0 {
                let _ = writeln!(
                    out,
                    r#"<circle cx="{:.1}" cy="{:.1}" r="4" fill="{colour}"/>"#,
                    sx(x.log10()),
                    sy(y.log10())
                );
            }
        }
        let ly = m + 18.0 + 18.0 * i as f64;
        let _ = writeln!(out, r#"<circle cx="{}" cy="{ly}" r="4" fill="{colour}"/>"#, w - m - 90.0);
        let _ = writeln!(out, r#"<text x="{}" y="{}" font-size="12">{}</text>"#, w - m - 80.0, ly + 4.0, escape(name));
    }
    out.push_str("</svg>\n");
    out
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> CltReport {
        CltReport {
            dim: 1,
            t: 1.0,
            records: [8.0, 16.0, 32.0, 64.0]
                .iter()
                .map(|&r| RadiusRecord {
                    r,
                    n: 1000,
                    sigma2: r,
                    sigma2_se: 0.1,
                    ks: 0.1 / r.sqrt(),
                    tv_proxy: 0.2 / r.sqrt(),
                    skewness: 0.0,
                    excess_kurtosis: 0.0,
                    mean_variance: 1.0 / r,
                })
                .collect(),
            slope: -0.5,
            slope_se: 0.01,
            r_squared: 1.0,
            tv_slope: -0.5,
            tv_slope_se: 0.01,
            ks_baseline: 0.027,
            ks_baseline_sd: 0.008,
            limit_variance_target: None,
            limit_variance_estimate: 1.0,
        }
    }

    #[test]
    fn json_round_trip_and_field_names() {
        let r = sample();
        let s = r.to_json().unwrap();
        for key in ["\"r\"", "\"n\"", "\"sigma2\"", "\"sigma2_se\"", "\"ks\"", "\"tv_proxy\"", "\"slope\"", "\"slope_se\""] {
            assert!(s.contains(key), "{key}");
        }
        assert_eq!(CltReport::from_json(&s).unwrap(), r);
    }

    #[test]
    fn csv_rows() {
        let mut out = Vec::new();
        sample().write_csv(&mut out).unwrap();
        assert_eq!(String::from_utf8(out).unwrap().lines().count(), 5);
    }

    #[test]
    fn svg_is_well_formed() {
        let svg = sample().to_svg();
        assert!(svg.starts_with("<svg"));
        assert!(svg.trim_end().ends_with("</svg>"));
        assert_eq!(svg.matches("<circle").count(), 8 + 2);
        assert!((sample().ks_fit().intercept - 0.1f64.ln()).abs() < 1e-12);
    }
}
