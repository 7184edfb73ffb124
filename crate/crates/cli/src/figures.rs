//! Figure data as CSV: one file per curve family.

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use qot_core::analytics::{
    binom_pmf, eps2, find_pdiff_max, p_con, p_con_malicious, p_con_malicious_boosted, p_diff,
};

use crate::config::ExperimentConfig;
use crate::format::{num, Csv};

/// Grid of mu values shared by the curve figures: 0 to 10 in steps of 0.05.
pub fn mu_grid() -> impl Iterator<Item = f64> {
    (0..=200).map(|i| i as f64 * 0.05)
}

fn header(quantity: &str, units: &str, config: &ExperimentConfig) -> Vec<String> {
    vec![
        format!("quantity: {quantity}"),
        format!("units: {units}"),
        format!("params: {}", config.provenance()),
    ]
}

/// Failure probability from residual errors against key length.
pub fn fig1(config: &ExperimentConfig) -> Result<String> {
    let mut csv = Csv::new(
        &header(
            &format!("eps2 = 1 - (1 - eps1_prime)^k with eps1_prime = {}", config.eps1_prime),
            "k in bits; eps2 dimensionless",
            config,
        ),
        &["k", "eps2"],
    );
    for k in 1..=400u64 {
        csv.row(&[k.to_string(), num(eps2(config.eps1_prime, k)?)]);
    }
    Ok(csv.into_string())
}

/// Honest conclusive probability against mu.
pub fn fig2(config: &ExperimentConfig) -> Result<String> {
    let mut csv = Csv::new(
        &header("p_con(mu) = (1 - exp(-mu/4)) / 2", "mu in mean photons; probability dimensionless", config),
        &["mu", "p_con"],
    );
    for mu in mu_grid() {
        csv.row(&[num(mu), num(p_con(mu)?)]);
    }
    Ok(csv.into_string())
}

/// Splitting-attack conclusive probability against mu.
pub fn fig3(config: &ExperimentConfig) -> Result<String> {
    let mut csv = Csv::new(
        &header(
            &format!(
                "malicious conclusive probability with a perfect detector (boosted, honest eta_d = {}) and without",
                config.eta_d
            ),
            "mu in mean photons at the honest detector; probabilities dimensionless",
            config,
        ),
        &["mu", "p_con_mal_boosted", "p_con_mal"],
    );
    for mu in mu_grid() {
        csv.row(&[
            num(mu),
            num(p_con_malicious_boosted(mu, config.eta_d)?),
            num(p_con_malicious(mu)?),
        ]);
    }
    Ok(csv.into_string())
}

/// Honest advantage over half the adversary, with its maximum marked.
pub fn fig4(config: &ExperimentConfig) -> Result<String> {
    let (mu_star, max) = find_pdiff_max(config.eta_d, 0.0, 20.0)?;
    let mut comments = header(
        &format!("p_diff(mu) = p_con(mu) - p_con_mal_boosted(mu) / 2 with eta_d = {}", config.eta_d),
        "mu in mean photons; probability dimensionless; is_max = 1 marks the maximum",
        config,
    );
    comments.push(format!("maximum: mu={} p_diff={}", num(mu_star), num(max)));
    let mut csv = Csv::new(&comments, &["mu", "p_diff", "is_max"]);
    let mut marked = false;
    for mu in mu_grid() {
        if !marked && mu > mu_star {
            csv.row(&[num(mu_star), num(max), "1".into()]);
            marked = true;
        }
        csv.row(&[num(mu), num(p_diff(mu, config.eta_d)?), "0".into()]);
    }
    Ok(csv.into_string())
}

/// Distribution of conclusive counts: honest at `i`, malicious at `i + 259`.
pub fn fig5(config: &ExperimentConfig) -> Result<String> {
    const SHIFT: u64 = 259;
    let n = config.n_pulses;
    let honest = p_con(config.mu)?;
    let malicious = p_con_malicious_boosted(config.mu, config.eta_d)?;
    let mut csv = Csv::new(
        &header(
            &format!(
                "binomial pmf of conclusive counts over N = {n} pulses at mu = {}: honest P(i), malicious P(i + {SHIFT})",
                config.mu
            ),
            "i in bits; probabilities dimensionless",
            config,
        ),
        &["i", "honest_pmf", "malicious_pmf_shifted"],
    );
    for i in 0..=n {
        let shifted = if i + SHIFT <= n {
            binom_pmf(n, malicious, i + SHIFT)
        } else {
            0.0
        };
        csv.row(&[i.to_string(), num(binom_pmf(n, honest, i)), num(shifted)]);
    }
    Ok(csv.into_string())
}

/// Writes `fig1.csv` .. `fig5.csv` into `dir`, creating it if needed.
pub fn write_figures(config: &ExperimentConfig, dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let figures = [fig1, fig2, fig3, fig4, fig5];
    let mut written = Vec::new();
    for (i, build) in figures.iter().enumerate() {
        let path = dir.join(format!("fig{}.csv", i + 1));
        std::fs::write(&path, build(config)?).with_context(|| format!("writing {}", path.display()))?;
        written.push(path);
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rows(csv: &str) -> Vec<Vec<String>> {
        csv.lines()
            .filter(|l| !l.starts_with('#'))
            .skip(1)
            .map(|l| l.split(',').map(String::from).collect())
            .collect()
    }

    #[test]
    fn fig1_landmark() {
        let csv = fig1(&ExperimentConfig::default()).unwrap();
        let rows = rows(&csv);
        assert_eq!(rows.len(), 400);
        let at = rows.iter().find(|r| r[0] == "295").unwrap();
        let value: f64 = at[1].parse().unwrap();
        assert!((value - 0.2).abs() < 0.005);
    }

    #[test]
    fn fig2_starts_at_zero() {
        let rows = rows(&fig2(&ExperimentConfig::default()).unwrap());
        assert_eq!(rows[0], ["0", "0"]);
    }

    #[test]
    fn fig4_marks_maximum() {
        let rows = rows(&fig4(&ExperimentConfig::default()).unwrap());
        let marked: Vec<_> = rows.iter().filter(|r| r[2] == "1").collect();
        assert_eq!(marked.len(), 1);
        let mu: f64 = marked[0][0].parse().unwrap();
        let value: f64 = marked[0][1].parse().unwrap();
        assert!((4.80..=4.90).contains(&mu) && (0.0722..=0.0742).contains(&value));
        let mus: Vec<f64> = rows.iter().map(|r| r[0].parse().unwrap()).collect();
        assert!(mus.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn fig5_masses() {
        let rows = rows(&fig5(&ExperimentConfig::default()).unwrap());
        assert_eq!(rows.len(), 801);
        let honest: f64 = rows.iter().map(|r| r[1].parse::<f64>().unwrap()).sum();
        assert!((honest - 1.0).abs() < 1e-8);
    }

    #[test]
    fn unwritable_directory_fails() {
        let dir = tempfile::tempdir().unwrap();
        let file = dir.path().join("blocker");
        std::fs::write(&file, "").unwrap();
        assert!(write_figures(&ExperimentConfig::default(), &file.join("sub")).is_err());
    }
}
