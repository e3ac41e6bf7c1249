//! Experiment configuration files (TOML).

use std::f64::consts::{FRAC_PI_2, PI};
use std::fmt;
use std::path::{Path, PathBuf};

use qcm_core::state::{random_pure_state, validate_state, ComplexMatrix};
use qcm_core::{Complex64, DensityMatrix, Observable, ObservablePair};
use serde::de::{self, MapAccess, SeqAccess, Visitor};
use serde::ser::SerializeMap;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{invalid, CliError};

/// Parses an angle in radians: a plain number, or a multiple of pi such as `pi/4`, `-pi/3`,
/// `3pi/4`, `0.5*pi` or `π/2`.
pub fn parse_angle(text: &str) -> Result<f64, String> {
    let cleaned: String = text
        .chars()
        .filter(|c| !c.is_whitespace())
        .collect::<String>()
        .to_lowercase();
    let cleaned = cleaned.replace('π', "pi");
    if let Ok(v) = cleaned.parse::<f64>() {
        return finite(v, text);
    }
    let (num, den) = match cleaned.split_once('/') {
        Some((n, d)) => {
            let den: f64 = d
                .parse()
                .map_err(|_| format!("bad denominator in angle `{text}`"))?;
            if den == 0.0 {
                return Err(format!("zero denominator in angle `{text}`"));
            }
            (n, den)
        }
        None => (cleaned.as_str(), 1.0),
    };
    let Some(coef) = num.strip_suffix("pi") else {
        return Err(format!("cannot parse angle `{text}`"));
    };
    let coef = coef.strip_suffix('*').unwrap_or(coef);
    let coef = match coef {
        "" | "+" => 1.0,
        "-" => -1.0,
        c => c
            .parse::<f64>()
            .map_err(|_| format!("bad coefficient in angle `{text}`"))?,
    };
    finite(coef * PI / den, text)
}

fn finite(v: f64, text: &str) -> Result<f64, String> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(format!("angle `{text}` is not finite"))
    }
}

struct AngleVisitor;

impl<'de> Visitor<'de> for AngleVisitor {
    type Value = f64;

    fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
        f.write_str("an angle in radians or a string like \"pi/4\"")
    }

    fn visit_f64<E: de::Error>(self, v: f64) -> Result<f64, E> {
        finite(v, &v.to_string()).map_err(E::custom)
    }

    fn visit_i64<E: de::Error>(self, v: i64) -> Result<f64, E> {
        Ok(v as f64)
    }

    fn visit_u64<E: de::Error>(self, v: u64) -> Result<f64, E> {
        Ok(v as f64)
    }

    fn visit_str<E: de::Error>(self, v: &str) -> Result<f64, E> {
        parse_angle(v).map_err(E::custom)
    }
}

struct Angle(f64);

impl<'de> Deserialize<'de> for Angle {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        d.deserialize_any(AngleVisitor).map(Angle)
    }
}

fn check_theta<E: de::Error>(v: f64) -> Result<f64, E> {
    if (0.0..=FRAC_PI_2).contains(&v) {
        Ok(v)
    } else {
        Err(E::custom(format!("theta must lie in [0, pi/2], got {v}")))
    }
}

/// Measurement strength: one value or a list (for sweeps).
#[derive(Debug, Clone, PartialEq)]
pub enum ThetaSpec {
    Single(f64),
    List(Vec<f64>),
}

impl ThetaSpec {
    pub fn values(&self) -> Vec<f64> {
        match self {
            ThetaSpec::Single(t) => vec![*t],
            ThetaSpec::List(ts) => ts.clone(),
        }
    }
}

impl Serialize for ThetaSpec {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            ThetaSpec::Single(t) => s.serialize_f64(*t),
            ThetaSpec::List(ts) => ts.serialize(s),
        }
    }
}

impl<'de> Deserialize<'de> for ThetaSpec {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        struct V;
        impl<'de> Visitor<'de> for V {
            type Value = ThetaSpec;

            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("theta as an angle or a list of angles")
            }

            fn visit_f64<E: de::Error>(self, v: f64) -> Result<ThetaSpec, E> {
                check_theta(AngleVisitor.visit_f64(v)?).map(ThetaSpec::Single)
            }

            fn visit_i64<E: de::Error>(self, v: i64) -> Result<ThetaSpec, E> {
                check_theta(v as f64).map(ThetaSpec::Single)
            }

            fn visit_u64<E: de::Error>(self, v: u64) -> Result<ThetaSpec, E> {
                check_theta(v as f64).map(ThetaSpec::Single)
            }

            fn visit_str<E: de::Error>(self, v: &str) -> Result<ThetaSpec, E> {
                check_theta(AngleVisitor.visit_str(v)?).map(ThetaSpec::Single)
            }

            fn visit_seq<A: SeqAccess<'de>>(self, mut seq: A) -> Result<ThetaSpec, A::Error> {
                let mut out = Vec::new();
                while let Some(Angle(v)) = seq.next_element()? {
                    out.push(check_theta(v)?);
                }
                Ok(ThetaSpec::List(out))
            }
        }
        d.deserialize_any(V)
    }
}

/// Control phases: an explicit list, or `{ uniform = K }` for the grid `2 pi k / K`.
#[derive(Debug, Clone, PartialEq)]
pub enum PhiSpec {
    List(Vec<f64>),
    Uniform(usize),
}

impl PhiSpec {
    pub fn values(&self) -> Vec<f64> {
        match self {
            PhiSpec::List(v) => v.clone(),
            PhiSpec::Uniform(k) => (0..*k)
                .map(|i| std::f64::consts::TAU * i as f64 / *k as f64)
                .collect(),
        }
    }
}

impl Serialize for PhiSpec {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            PhiSpec::List(v) => v.serialize(s),
            PhiSpec::Uniform(k) => {
                let mut m = s.serialize_map(Some(1))?;
                m.serialize_entry("uniform", k)?;
                m.end()
            }
        }
    }
}

impl<'de> Deserialize<'de> for PhiSpec {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        struct V;
        impl<'de> Visitor<'de> for V {
            type Value = PhiSpec;

            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("phi as a list of angles or { uniform = K }")
            }

            fn visit_f64<E: de::Error>(self, v: f64) -> Result<PhiSpec, E> {
                AngleVisitor.visit_f64(v).map(|v| PhiSpec::List(vec![v]))
            }

            fn visit_i64<E: de::Error>(self, v: i64) -> Result<PhiSpec, E> {
                Ok(PhiSpec::List(vec![v as f64]))
            }

            fn visit_str<E: de::Error>(self, v: &str) -> Result<PhiSpec, E> {
                AngleVisitor.visit_str(v).map(|v| PhiSpec::List(vec![v]))
            }

            fn visit_seq<A: SeqAccess<'de>>(self, mut seq: A) -> Result<PhiSpec, A::Error> {
                let mut out = Vec::new();
                while let Some(Angle(v)) = seq.next_element()? {
                    out.push(v);
                }
                Ok(PhiSpec::List(out))
            }

            fn visit_map<A: MapAccess<'de>>(self, mut map: A) -> Result<PhiSpec, A::Error> {
                let mut k = None;
                while let Some(key) = map.next_key::<String>()? {
                    if key != "uniform" {
                        return Err(de::Error::unknown_field(&key, &["uniform"]));
                    }
                    k = Some(map.next_value::<usize>()?);
                }
                k.map(PhiSpec::Uniform)
                    .ok_or_else(|| de::Error::missing_field("uniform"))
            }
        }
        d.deserialize_any(V)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub enum StateSpec {
    /// `plus`, `y-plus`, `maximally-mixed` or `computational-k`.
    Preset(String),
    /// Density matrix rows.
    Explicit {
        re: Vec<Vec<f64>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        im: Option<Vec<Vec<f64>>>,
    },
    /// Haar-random pure state.
    Random { seed: u64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub enum BasisSpec {
    /// `computational` or `fourier`.
    Preset(String),
    /// `re[k]` and `im[k]` hold the components of basis vector `k`.
    Explicit {
        re: Vec<Vec<f64>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        im: Option<Vec<Vec<f64>>>,
    },
    Random {
        seed: u64,
    },
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    #[default]
    Json,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    #[default]
    TwoPhase,
    Fourier,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub dimension: usize,
    #[serde(default)]
    pub seed: u64,
    /// Shots per setting; absent means exact statistics. For `snr` this is the number of
    /// post-selected events per phase.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shots: Option<u64>,
    /// Number of independent seeds for `snr`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seeds: Option<usize>,
    #[serde(default)]
    pub format: Format,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub method: Option<Method>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    pub theta: ThetaSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eigenvalues_a: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eigenvalues_b: Option<Vec<f64>>,
    pub phi: PhiSpec,
    pub state: StateSpec,
    pub basis_a: BasisSpec,
    pub basis_b: BasisSpec,
}

/// A configuration with its quantum objects built and checked.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub state: DensityMatrix,
    pub pair: ObservablePair,
    pub thetas: Vec<f64>,
    pub phis: Vec<f64>,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| invalid(e.to_string().trim_end().to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| invalid(format!("cannot read config {}: {e}", path.display())))?;
        Self::from_toml(&text).map_err(|e| match e {
            CliError::Validation(msg) => invalid(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn resolve(&self) -> Result<Experiment, CliError> {
        let d = self.dimension;
        if d < 2 {
            return Err(invalid(format!("dimension: must be at least 2, got {d}")));
        }
        let state = build_state(d, &self.state)?;
        let obs_a = build_observable(d, &self.basis_a, self.eigenvalues_a.as_deref(), "a")?;
        let obs_b = build_observable(d, &self.basis_b, self.eigenvalues_b.as_deref(), "b")?;
        let pair = ObservablePair::new(obs_a, obs_b).map_err(|e| invalid(format!("basis_b: {e}")))?;
        let thetas = self.theta.values();
        if thetas.is_empty() {
            return Err(invalid("theta: list is empty"));
        }
        let phis = self.phi.values();
        if phis.is_empty() {
            return Err(invalid("phi: no phases given"));
        }
        Ok(Experiment {
            state,
            pair,
            thetas,
            phis,
        })
    }
}

fn complex_rows(
    field: &str,
    re: &[Vec<f64>],
    im: Option<&[Vec<f64>]>,
    d: usize,
) -> Result<Vec<Vec<Complex64>>, CliError> {
    let check = |name: &str, m: &[Vec<f64>]| {
        if m.len() != d || m.iter().any(|r| r.len() != d) {
            let shape: Vec<usize> = m.iter().map(Vec::len).collect();
            Err(invalid(format!(
                "{field}.{name}: expected {d} rows of {d} numbers, got row lengths {shape:?}"
            )))
        } else {
            Ok(())
        }
    };
    check("re", re)?;
    if let Some(im) = im {
        check("im", im)?;
    }
    Ok((0..d)
        .map(|i| {
            (0..d)
                .map(|j| Complex64::new(re[i][j], im.map_or(0.0, |m| m[i][j])))
                .collect()
        })
        .collect())
}

fn build_state(d: usize, spec: &StateSpec) -> Result<DensityMatrix, CliError> {
    let built = match spec {
        StateSpec::Preset(name) => match name.as_str() {
            "plus" => DensityMatrix::plus(d),
            "y-plus" => DensityMatrix::y_plus(d),
            "maximally-mixed" => DensityMatrix::maximally_mixed(d),
            other => {
                let k = other
                    .strip_prefix("computational-")
                    .and_then(|k| k.parse::<usize>().ok())
                    .ok_or_else(|| {
                        invalid(format!(
                            "state.preset: unknown preset `{other}` \
                             (expected plus, y-plus, maximally-mixed or computational-<k>)"
                        ))
                    })?;
                DensityMatrix::computational(d, k)
            }
        },
        StateSpec::Explicit { re, im } => {
            let rows = complex_rows("state.explicit", re, im.as_deref(), d)?;
            validate_state(ComplexMatrix::from_fn(d, d, |i, j| rows[i][j]))
        }
        StateSpec::Random { seed } => random_pure_state(d, *seed),
    };
    built.map_err(|e| invalid(format!("state: {e}")))
}

fn build_observable(
    d: usize,
    spec: &BasisSpec,
    eigs: Option<&[f64]>,
    which: &str,
) -> Result<Observable, CliError> {
    let field = format!("basis_{which}");
    let basis = match spec {
        BasisSpec::Preset(name) => match name.as_str() {
            "computational" => Observable::computational(d),
            "fourier" => Observable::fourier(d),
            other => {
                return Err(invalid(format!(
                    "{field}.preset: unknown preset `{other}` (expected computational or fourier)"
                )))
            }
        },
        BasisSpec::Explicit { re, im } => {
            let cols = complex_rows(&format!("{field}.explicit"), re, im.as_deref(), d)?;
            Observable::new(ComplexMatrix::from_fn(d, d, |i, k| cols[k][i]), None)
        }
        BasisSpec::Random { seed } => Observable::random(d, *seed),
    }
    .map_err(|e| invalid(format!("{field}: {e}")))?;
    match eigs {
        None => Ok(basis),
        Some(e) => basis
            .with_eigenvalues(e.to_vec())
            .map_err(|err| invalid(format!("eigenvalues_{which}: {err}"))),
    }
}

#[cfg(test)]
#[allow(clippy::approx_constant, clippy::needless_range_loop)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_4;

    const BASIC: &str = r#"
dimension = 2
theta = "pi/4"
phi = ["pi/4", "-pi/4"]
state = { preset = "y-plus" }
basis_a = { preset = "computational" }
basis_b = { preset = "fourier" }
"#;

    #[test]
    fn angles() {
        assert_eq!(parse_angle("pi/4").unwrap(), FRAC_PI_4);
        assert_eq!(parse_angle("-pi/4").unwrap(), -FRAC_PI_4);
        assert_eq!(parse_angle(" 3pi / 4 ").unwrap(), 3.0 * PI / 4.0);
        assert_eq!(parse_angle("0.5*pi").unwrap(), 0.5 * PI);
        assert_eq!(parse_angle("π/2").unwrap(), PI / 2.0);
        assert_eq!(parse_angle("0.25").unwrap(), 0.25);
        assert!(parse_angle("pie").is_err());
        assert!(parse_angle("pi/0").is_err());
        assert!(parse_angle("inf").is_err());
    }

    #[test]
    fn parses_basic_config() {
        let cfg = ExperimentConfig::from_toml(BASIC).unwrap();
        assert_eq!(cfg.theta, ThetaSpec::Single(FRAC_PI_4));
        assert_eq!(cfg.phi, PhiSpec::List(vec![FRAC_PI_4, -FRAC_PI_4]));
        assert_eq!(cfg.format, Format::Json);
        let exp = cfg.resolve().unwrap();
        assert_eq!(exp.pair.dim(), 2);
        assert!(exp.pair.fully_overlapping());
    }

    #[test]
    fn theta_out_of_range_names_field() {
        let text = BASIC.replace("theta = \"pi/4\"", "theta = 2.0");
        let msg = ExperimentConfig::from_toml(&text).unwrap_err().to_string();
        assert!(msg.contains("theta"), "{msg}");
        assert!(msg.contains("line 3"), "{msg}");
    }

    #[test]
    fn unknown_field_rejected() {
        let text = format!("{BASIC}\nshotz = 10\n");
        let msg = ExperimentConfig::from_toml(&text).unwrap_err().to_string();
        assert!(msg.contains("shotz"), "{msg}");
    }

    #[test]
    fn round_trip_is_identity() {
        let text = format!(
            "{}\nshots = 1000\nseeds = 12\nmethod = \"fourier\"\neigenvalues_a = [1.0, -1.0]\noutput = \"x.json\"\n",
            BASIC.replace("theta = \"pi/4\"", "theta = [0.05, \"pi/4\"]")
        );
        let cfg = ExperimentConfig::from_toml(&text).unwrap();
        let again = ExperimentConfig::from_toml(&cfg.to_toml()).unwrap();
        assert_eq!(cfg, again);

        let mut explicit = cfg.clone();
        explicit.state = StateSpec::Explicit {
            re: vec![vec![0.5, 0.0], vec![0.0, 0.5]],
            im: Some(vec![vec![0.0, -0.1], vec![0.1, 0.0]]),
        };
        explicit.basis_b = BasisSpec::Random { seed: 9 };
        explicit.phi = PhiSpec::Uniform(8);
        assert_eq!(
            ExperimentConfig::from_toml(&explicit.to_toml()).unwrap(),
            explicit
        );
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let text = BASIC.replace(
            "state = { preset = \"y-plus\" }",
            "state = { explicit = { re = [[1.0, 0.0, 0.0], [0.0, 0.0, 0.0]] } }",
        );
        let err = ExperimentConfig::from_toml(&text).unwrap().resolve().unwrap_err();
        assert!(err.to_string().contains("state.explicit.re"), "{err}");
        assert_eq!(err.exit_code(), 1);

        let text = format!("{BASIC}eigenvalues_b = [1.0, 2.0, 3.0]\n");
        let err = ExperimentConfig::from_toml(&text).unwrap().resolve().unwrap_err();
        assert!(err.to_string().contains("eigenvalues_b"), "{err}");
    }

    #[test]
    fn bad_presets() {
        let text = BASIC.replace("y-plus", "z-plus");
        assert!(ExperimentConfig::from_toml(&text).unwrap().resolve().is_err());
        let text = BASIC.replace("y-plus", "computational-5");
        let err = ExperimentConfig::from_toml(&text).unwrap().resolve().unwrap_err();
        assert!(
            err.to_string().starts_with("invalid configuration: state"),
            "{err}"
        );
        let text = BASIC.replace("\"fourier\"", "\"hadamard\"");
        let err = ExperimentConfig::from_toml(&text).unwrap().resolve().unwrap_err();
        assert!(err.to_string().contains("basis_b.preset"), "{err}");
    }

    #[test]
    fn uniform_grid() {
        let text = BASIC.replace("phi = [\"pi/4\", \"-pi/4\"]", "phi = { uniform = 4 }");
        let cfg = ExperimentConfig::from_toml(&text).unwrap();
        assert_eq!(cfg.phi.values(), vec![0.0, PI / 2.0, PI, 1.5 * PI]);
    }
}
