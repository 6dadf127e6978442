//! Experiment configuration: a flat-key TOML file with sections
//! `[ensemble]`, `[characters]`, `[twists]`, `[schedule]`, `[audit]`, `[output]`.
//! A config round-trips through serialization unchanged, and its canonical
//! serialization is hashed into every report.

use anyhow::{bail, Context, Result};
use divchar::characters::DirichletCharacter;
use divchar::multiplicative::Twist;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EnsembleConfig {
    /// RNG seed; fully determines the ensemble.
    pub seed: u64,
    /// Primes are sampled uniformly from [prime_min, prime_max].
    pub prime_min: u64,
    pub prime_max: u64,
    /// Number of random curves (explicit fixtures come on top).
    pub curve_count: u32,
    /// The order-threshold exponent: points must have ord P >= p^(1/2 + epsilon).
    pub epsilon: f64,
    /// Whether the ord P >= p^(1/2 + epsilon) restriction is applied when
    /// searching points.
    pub require_large_order: bool,
    /// Rejection budget per curve for the point search.
    pub point_attempts: u32,
    /// Explicit fixtures "p,a,b,Px,Py" (e.g. the hand-checkable
    /// "5,1,1,0,1"), prepended to the generated curves.
    pub curves: Vec<String>,
}

impl Default for EnsembleConfig {
    fn default() -> Self {
        EnsembleConfig {
            seed: 1,
            prime_min: 1_000,
            prime_max: 100_000,
            curve_count: 20,
            epsilon: 0.1,
            require_large_order: true,
            point_attempts: 200,
            curves: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CharactersConfig {
    /// Mod-p character specs, `modp:d=<order>,label=<label>`. Curves whose
    /// p-1 is not divisible by d produce an error-flagged row.
    pub specs: Vec<String>,
}

impl Default for CharactersConfig {
    fn default() -> Self {
        CharactersConfig {
            specs: vec!["modp:d=2,label=1".into()],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TwistsConfig {
    /// Twist specs: `one`, `tau:<nu>`, `mu`, `mu2`, `kfree:<k>`,
    /// `smooth:y=<y>`, `r0`, `dirichlet:q=<q>,exp=<e1,e2,...>`.
    pub specs: Vec<String>,
}

impl Default for TwistsConfig {
    fn default() -> Self {
        TwistsConfig {
            specs: vec!["one".into()],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScheduleConfig {
    /// Absolute values of N.
    pub n_values: Vec<u64>,
    /// Values of N given as fractions of each context's period R.
    pub n_fractions: Vec<f64>,
    /// Permit N > R.
    pub override_range: bool,
}

impl Default for ScheduleConfig {
    fn default() -> Self {
        ScheduleConfig {
            n_values: Vec::new(),
            n_fractions: vec![0.125, 0.25, 0.5, 1.0],
            override_range: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AuditConfig {
    /// Bound families to scan: "1.1", "1.2", "1.3", "1.4".
    pub theorems: Vec<String>,
    /// Interval (x, y] for the prime-factor partition audit.
    pub interval_x: f64,
    pub interval_y: f64,
    /// Smoothness bound for the smooth twist/audit.
    pub smooth_y: u64,
    /// Crossing threshold for the smooth decomposition.
    pub smooth_l0: u64,
    /// tau order used by the tau-bounded family scan.
    pub nu: u32,
    /// Per-context N for the verify command's decomposition audits
    /// (clamped to R).
    pub audit_n: u64,
    /// Refuse scans whose estimated work (stream steps plus order scans)
    /// exceeds this.
    pub cost_ceiling: u64,
}

impl Default for AuditConfig {
    fn default() -> Self {
        AuditConfig {
            theorems: vec!["1.1".into(), "1.2".into(), "1.3".into(), "1.4".into()],
            interval_x: 16.0,
            interval_y: 256.0,
            smooth_y: 100,
            smooth_l0: 64,
            nu: 2,
            audit_n: 20_000,
            cost_ceiling: 5_000_000_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    /// Worker threads for job-level parallelism.
    pub workers: usize,
    /// Output path; empty means stdout.
    pub out_path: String,
    /// "csv" or "json".
    pub format: String,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            workers: 1,
            out_path: String::new(),
            format: "csv".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub ensemble: EnsembleConfig,
    pub characters: CharactersConfig,
    pub twists: TwistsConfig,
    pub schedule: ScheduleConfig,
    pub audit: AuditConfig,
    pub output: OutputConfig,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text).context("parsing config")?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// SHA-256 of the canonical serialization, truncated for report rows.
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.to_toml().as_bytes());
        let hex: String = digest.iter().map(|b| format!("{b:02x}")).collect();
        hex[..16].to_string()
    }

    pub fn validate(&self) -> Result<()> {
        if self.ensemble.prime_min < 5
            || self.ensemble.prime_min > self.ensemble.prime_max
            || self.ensemble.prime_max >= divchar::fp::MAX_MODULUS
        {
            bail!(
                "ensemble prime range [{}, {}] invalid (need 5 <= min <= max < 2^31)",
                self.ensemble.prime_min,
                self.ensemble.prime_max
            );
        }
        if !(self.ensemble.epsilon > 0.0 && self.ensemble.epsilon <= 0.5) {
            bail!(
                "order threshold exponent {} out of range (0, 0.5]",
                self.ensemble.epsilon
            );
        }
        if self.ensemble.curve_count == 0 && self.ensemble.curves.is_empty() {
            bail!("empty ensemble: curve_count = 0 and no explicit curves");
        }
        if self.characters.specs.is_empty() {
            bail!("no character specs");
        }
        for s in &self.characters.specs {
            parse_character_spec(s)?;
        }
        for s in &self.twists.specs {
            parse_twist_spec(s)?;
        }
        for t in &self.audit.theorems {
            if divchar::sums::Theorem::from_label(t).is_none() {
                bail!("unknown bound family {t:?} (use 1.1, 1.2, 1.3 or 1.4)");
            }
        }
        if self.schedule.n_values.is_empty() && self.schedule.n_fractions.is_empty() {
            bail!("empty N schedule");
        }
        if self.schedule.n_values.iter().any(|&n| n == 0) {
            bail!("schedule N values must be positive");
        }
        if self
            .schedule
            .n_fractions
            .iter()
            .any(|f| !f.is_finite() || *f <= 0.0)
        {
            bail!("schedule N fractions must be positive and finite");
        }
        for c in &self.ensemble.curves {
            parse_fixture(c)?;
        }
        match self.output.format.as_str() {
            "csv" | "json" => {}
            other => bail!("unknown output format {other:?}"),
        }
        Ok(())
    }
}

/// A mod-p character selector: order and label, applied per curve.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ModPCharSpec {
    pub d: u64,
    pub label: u64,
}

pub fn parse_character_spec(s: &str) -> Result<ModPCharSpec> {
    let body = s
        .strip_prefix("modp:")
        .with_context(|| format!("character spec {s:?} must start with \"modp:\""))?;
    let kv = parse_kv(body)?;
    let d = get_u64(&kv, "d", s)?;
    let label = get_u64(&kv, "label", s)?;
    if d < 2 {
        bail!("character spec {s:?}: order must be >= 2");
    }
    if divchar::fp::gcd(label % d, d) != 1 {
        bail!("character spec {s:?}: label must be coprime to the order");
    }
    Ok(ModPCharSpec { d, label })
}

pub fn parse_twist_spec(s: &str) -> Result<Twist> {
    if let Some(rest) = s.strip_prefix("tau:") {
        let nu: u32 = rest.parse().with_context(|| format!("twist {s:?}"))?;
        if nu < 1 {
            bail!("twist {s:?}: nu must be >= 1");
        }
        return Ok(Twist::TauNu(nu));
    }
    if let Some(rest) = s.strip_prefix("kfree:") {
        let k: u32 = rest.parse().with_context(|| format!("twist {s:?}"))?;
        if k < 2 {
            bail!("twist {s:?}: k must be >= 2");
        }
        return Ok(Twist::KFree(k));
    }
    if let Some(rest) = s.strip_prefix("smooth:") {
        let kv = parse_kv(rest)?;
        return Ok(Twist::Smooth(get_u64(&kv, "y", s)?));
    }
    if let Some(rest) = s.strip_prefix("dirichlet:") {
        let (q_part, exp_part) = rest
            .split_once(",exp=")
            .with_context(|| format!("twist {s:?} needs exp="))?;
        let q = q_part
            .strip_prefix("q=")
            .with_context(|| format!("twist {s:?} needs q="))?
            .parse::<u64>()
            .with_context(|| format!("twist {s:?}"))?;
        let exps: Vec<u64> = exp_part
            .split(',')
            .map(|e| e.parse::<u64>())
            .collect::<std::result::Result<_, _>>()
            .with_context(|| format!("twist {s:?}"))?;
        let chi = DirichletCharacter::new(q, &exps)
            .with_context(|| format!("twist {s:?}"))?;
        return Ok(Twist::Dirichlet(chi));
    }
    match s {
        "one" => Ok(Twist::One),
        "mu" => Ok(Twist::Moebius),
        "mu2" => Ok(Twist::MoebiusSq),
        "r0" => Ok(Twist::SumTwoSquares),
        other => bail!("unknown twist spec {other:?}"),
    }
}

/// "p,a,b,Px,Py" with all five values in decimal.
pub fn parse_fixture(s: &str) -> Result<(u64, u64, u64, u64, u64)> {
    let parts: Vec<&str> = s.split(',').collect();
    if parts.len() != 5 {
        bail!("fixture {s:?} must be \"p,a,b,Px,Py\"");
    }
    let vals: Vec<u64> = parts
        .iter()
        .map(|p| p.trim().parse::<u64>())
        .collect::<std::result::Result<_, _>>()
        .with_context(|| format!("fixture {s:?}"))?;
    Ok((vals[0], vals[1], vals[2], vals[3], vals[4]))
}

fn parse_kv(body: &str) -> Result<Vec<(String, String)>> {
    body.split(',')
        .map(|pair| {
            let (k, v) = pair
                .split_once('=')
                .with_context(|| format!("expected key=value, got {pair:?}"))?;
            Ok((k.trim().to_string(), v.trim().to_string()))
        })
        .collect()
}

fn get_u64(kv: &[(String, String)], key: &str, ctx: &str) -> Result<u64> {
    kv.iter()
        .find(|(k, _)| k == key)
        .with_context(|| format!("{ctx:?} missing {key}="))?
        .1
        .parse()
        .with_context(|| format!("{ctx:?}: {key} must be an integer"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_roundtrip() {
        let cfg = ExperimentConfig::default();
        let text = cfg.to_toml();
        let back = ExperimentConfig::from_toml(&text).unwrap();
        assert_eq!(cfg, back);
        assert_eq!(cfg.hash(), back.hash());
    }

    #[test]
    fn modified_roundtrip() {
        let mut cfg = ExperimentConfig::default();
        cfg.ensemble.seed = 999;
        cfg.ensemble.curves = vec!["5,1,1,0,1".into()];
        cfg.twists.specs = vec!["mu2".into(), "dirichlet:q=4,exp=1".into(), "tau:3".into()];
        cfg.schedule.n_values = vec![4, 100];
        let back = ExperimentConfig::from_toml(&cfg.to_toml()).unwrap();
        assert_eq!(cfg, back);
        assert_ne!(cfg.hash(), ExperimentConfig::default().hash());
    }

    #[test]
    fn spec_parsers() {
        assert_eq!(
            parse_character_spec("modp:d=2,label=1").unwrap(),
            ModPCharSpec { d: 2, label: 1 }
        );
        assert!(parse_character_spec("dirichlet:q=4,exp=1").is_err());
        assert!(parse_character_spec("modp:d=4,label=2").is_err());
        assert_eq!(parse_twist_spec("one").unwrap(), Twist::One);
        assert_eq!(parse_twist_spec("tau:2").unwrap(), Twist::TauNu(2));
        assert_eq!(parse_twist_spec("mu2").unwrap(), Twist::MoebiusSq);
        assert_eq!(parse_twist_spec("kfree:3").unwrap(), Twist::KFree(3));
        assert_eq!(parse_twist_spec("smooth:y=100").unwrap(), Twist::Smooth(100));
        assert_eq!(parse_twist_spec("r0").unwrap(), Twist::SumTwoSquares);
        let Twist::Dirichlet(chi) = parse_twist_spec("dirichlet:q=8,exp=1,1").unwrap() else {
            panic!()
        };
        assert_eq!(chi.modulus(), 8);
        assert!(parse_twist_spec("bogus").is_err());
        assert!(parse_fixture("5,1,1,0,1").is_ok());
        assert!(parse_fixture("5,1,1").is_err());
    }

    #[test]
    fn validation_rejects_empty_ensemble() {
        let mut cfg = ExperimentConfig::default();
        cfg.ensemble.curve_count = 0;
        assert!(cfg.validate().is_err());
        cfg.ensemble.curves = vec!["5,1,1,0,1".into()];
        assert!(cfg.validate().is_ok());
    }

    #[test]
    fn validation_rejects_bad_ranges() {
        let mut cfg = ExperimentConfig::default();
        cfg.ensemble.epsilon = 0.0;
        assert!(cfg.validate().is_err());
        cfg.ensemble.epsilon = 0.6;
        assert!(cfg.validate().is_err());
        let mut cfg = ExperimentConfig::default();
        cfg.ensemble.prime_max = 1 << 31;
        assert!(cfg.validate().is_err());
        let mut cfg = ExperimentConfig::default();
        cfg.output.format = "yaml".into();
        assert!(cfg.validate().is_err());
        let mut cfg = ExperimentConfig::default();
        cfg.schedule.n_values = vec![0];
        assert!(cfg.validate().is_err());
        let mut cfg = ExperimentConfig::default();
        cfg.schedule.n_fractions = vec![-0.5];
        assert!(cfg.validate().is_err());
    }
}
