//! Human-editable TOML schemas for instance and study files (versioned with
//! a `schema` field), and their conversion into runtime types.

use crate::demand::{make_pattern_with, DemandSpec, Family, PatternId, PatternOverrides};
use crate::experiments::{Sampling, StudyFamily, StudySpec};
use crate::heuristic::EstimateOpts;
use crate::instance::{Costs, Instance, State};
use crate::{Error, Result};
use serde::Deserialize;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceFile {
    pub schema: u32,
    pub instance: InstanceSection,
    pub demand: DemandSection,
    #[serde(default)]
    pub patterns: Option<PatternOverrides>,
    #[serde(default)]
    pub opening: Option<OpeningSection>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceSection {
    pub horizon: usize,
    pub costs: CostsSection,
    #[serde(default)]
    pub q_max: Option<i64>,
    #[serde(default)]
    pub truncation_eps: Option<f64>,
    #[serde(default)]
    pub state_bounds: Option<[[i64; 2]; 2]>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CostsSection {
    pub k: f64,
    pub z: f64,
    pub r: f64,
    pub v: f64,
    pub h: f64,
    pub b: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DemandSection {
    pub loc1: LocationDemand,
    pub loc2: LocationDemand,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LocationDemand {
    pub family: String,
    #[serde(default)]
    pub pattern: Option<String>,
    #[serde(default)]
    pub scale: Option<f64>,
    #[serde(default)]
    pub means: Option<Vec<f64>>,
    #[serde(default)]
    pub cv: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OpeningSection {
    pub i1: i64,
    pub i2: i64,
}

impl InstanceFile {
    pub fn parse(text: &str) -> Result<Self> {
        let file: InstanceFile =
            toml::from_str(text).map_err(|e| Error::Config(format!("instance file: {e}")))?;
        if file.schema != SCHEMA_VERSION {
            return Err(Error::Config(format!(
                "instance schema {} unsupported (expected {SCHEMA_VERSION})",
                file.schema
            )));
        }
        Ok(file)
    }

    pub fn to_instance(&self) -> Result<Instance> {
        let overrides = self.patterns.clone().unwrap_or_default();
        let horizon = self.instance.horizon;
        let build = |loc: &LocationDemand| -> Result<DemandSpec> {
            let family = match loc.family.to_ascii_lowercase().as_str() {
                "poisson" => Family::Poisson,
                "normal" => Family::Normal,
                other => return Err(Error::Config(format!("unknown demand family `{other}`"))),
            };
            let means = match (&loc.means, &loc.pattern) {
                (Some(m), None) => m.clone(),
                (None, Some(p)) => {
                    let tag: PatternId = p.parse()?;
                    let scale = loc
                        .scale
                        .ok_or_else(|| Error::Config("pattern demand needs a `scale`".into()))?;
                    make_pattern_with(tag, horizon, scale, &overrides)?
                }
                _ => {
                    return Err(Error::Config(
                        "specify exactly one of `means` or `pattern`".into(),
                    ))
                }
            };
            match family {
                Family::Poisson => DemandSpec::poisson(means),
                Family::Normal => DemandSpec::normal(
                    means,
                    loc.cv
                        .ok_or_else(|| Error::Config("Normal demand needs `cv`".into()))?,
                ),
            }
        };
        let c = &self.instance.costs;
        Instance::with_options(
            horizon,
            Costs {
                k: c.k,
                z: c.z,
                r: c.r,
                v: c.v,
                h: c.h,
                b: c.b,
            },
            [build(&self.demand.loc1)?, build(&self.demand.loc2)?],
            self.instance
                .state_bounds
                .map(|b| [(b[0][0], b[0][1]), (b[1][0], b[1][1])]),
            self.instance.q_max,
            self.instance
                .truncation_eps
                .unwrap_or(crate::demand::DEFAULT_TRUNCATION_EPS),
        )
    }

    pub fn opening(&self) -> State {
        self.opening
            .as_ref()
            .map_or(State::new(0, 0), |o| State::new(o.i1, o.i2))
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudyFile {
    pub schema: u32,
    pub study: StudySection,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudySection {
    pub family: String,
    #[serde(default)]
    pub horizon: Option<usize>,
    #[serde(default)]
    pub scale: Option<f64>,
    #[serde(default)]
    pub cv: Option<f64>,
    #[serde(default)]
    pub h: Option<f64>,
    #[serde(default)]
    pub k: Option<Vec<f64>>,
    #[serde(default)]
    pub r: Option<Vec<f64>>,
    #[serde(default)]
    pub b: Option<Vec<f64>>,
    #[serde(default)]
    pub zv: Option<Vec<[f64; 2]>>,
    #[serde(default)]
    pub patterns: Option<Vec<String>>,
    #[serde(default)]
    pub gap_pair: Option<String>,
    #[serde(default)]
    pub openings: Option<Vec<[i64; 2]>>,
    #[serde(default)]
    pub n_regions: Option<usize>,
    #[serde(default)]
    pub truncation_eps: Option<f64>,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub alpha: Option<f64>,
    #[serde(default)]
    pub rel_halfwidth: Option<f64>,
    #[serde(default)]
    pub sampling: Option<SamplingSection>,
    #[serde(default)]
    pub estimate: Option<EstimateSection>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplingSection {
    pub mode: String,
    #[serde(default)]
    pub n: Option<usize>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimateSection {
    #[serde(default)]
    pub batch: Option<usize>,
    #[serde(default)]
    pub min_reps: Option<usize>,
    #[serde(default)]
    pub cap: Option<usize>,
}

impl StudyFile {
    pub fn parse(text: &str) -> Result<Self> {
        let file: StudyFile =
            toml::from_str(text).map_err(|e| Error::Config(format!("study file: {e}")))?;
        if file.schema != SCHEMA_VERSION {
            return Err(Error::Config(format!(
                "study schema {} unsupported (expected {SCHEMA_VERSION})",
                file.schema
            )));
        }
        Ok(file)
    }

    pub fn to_spec(&self) -> Result<StudySpec> {
        let s = &self.study;
        let family: StudyFamily = s.family.parse()?;
        let mut spec = match family {
            StudyFamily::FourPeriodPoisson => StudySpec::four_period_default(),
            StudyFamily::TenPeriodNormal => StudySpec::ten_period_default(),
        };
        if let Some(h) = s.horizon {
            spec.horizon = h;
        }
        if let Some(x) = s.scale {
            spec.scale = x;
        }
        if let Some(x) = s.cv {
            spec.cv = x;
        }
        if let Some(x) = s.h {
            spec.h = x;
        }
        if let Some(x) = &s.k {
            spec.k_grid = x.clone();
        }
        if let Some(x) = &s.r {
            spec.r_grid = x.clone();
        }
        if let Some(x) = &s.b {
            spec.b_grid = x.clone();
        }
        if let Some(x) = &s.zv {
            spec.zv_grid = x.iter().map(|p| (p[0], p[1])).collect();
        }
        if let Some(pats) = &s.patterns {
            spec.patterns = pats
                .iter()
                .map(|p| p.parse())
                .collect::<Result<Vec<PatternId>>>()?;
        }
        if let Some(g) = &s.gap_pair {
            spec.gap_pair = g.parse()?;
        }
        if let Some(o) = &s.openings {
            spec.openings = o.iter().map(|p| (p[0], p[1])).collect();
        }
        if let Some(x) = s.n_regions {
            spec.n_regions = x;
        }
        if let Some(x) = s.truncation_eps {
            spec.truncation_eps = x;
        }
        if let Some(x) = s.seed {
            spec.seed = x;
        }
        if let Some(x) = s.alpha {
            spec.alpha = x;
        }
        if let Some(x) = s.rel_halfwidth {
            spec.rel_halfwidth = x;
        }
        if let Some(sec) = &s.sampling {
            spec.sampling = match sec.mode.as_str() {
                "full" => Sampling::Full,
                "lhs" => Sampling::Lhs {
                    n: sec
                        .n
                        .ok_or_else(|| Error::Config("lhs sampling needs `n`".into()))?,
                },
                "lhs-patterns" => Sampling::LhsPatterns {
                    n: sec
                        .n
                        .ok_or_else(|| Error::Config("lhs-patterns sampling needs `n`".into()))?,
                },
                other => return Err(Error::Config(format!("unknown sampling mode `{other}`"))),
            };
        }
        let mut opts = EstimateOpts::default();
        if let Some(e) = &s.estimate {
            if let Some(x) = e.batch {
                opts.batch = x;
            }
            if let Some(x) = e.min_reps {
                opts.min_reps = x;
            }
            if let Some(x) = e.cap {
                opts.cap = x;
            }
        }
        spec.estimate = opts;
        Ok(spec)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiments::GapPair;

    const INSTANCE_TOML: &str = r#"
schema = 1

[instance]
horizon = 4
q_max = 30

[instance.costs]
k = 10.0
z = 2.0
r = 5.0
v = 1.0
h = 1.0
b = 3.0

[demand.loc1]
family = "poisson"
pattern = "LCY1"
scale = 6.0

[demand.loc2]
family = "poisson"
pattern = "STAT"
scale = 6.0

[opening]
i1 = 3
i2 = -2
"#;

    #[test]
    fn instance_file_roundtrip() {
        let file = InstanceFile::parse(INSTANCE_TOML).unwrap();
        let inst = file.to_instance().unwrap();
        assert_eq!(inst.horizon, 4);
        assert_eq!(inst.q_max, 30);
        assert_eq!(file.opening(), State::new(3, -2));
    }

    #[test]
    fn wrong_schema_rejected() {
        let text = INSTANCE_TOML.replace("schema = 1", "schema = 2");
        assert!(InstanceFile::parse(&text).is_err());
    }

    #[test]
    fn emp_table_overrides_apply() {
        let text = r#"
schema = 1

[instance]
horizon = 4

[instance.costs]
k = 10.0
z = 2.0
r = 5.0
v = 1.0
h = 1.0
b = 3.0

[demand.loc1]
family = "poisson"
pattern = "EMP1"
scale = 10.0

[demand.loc2]
family = "poisson"
pattern = "STAT"
scale = 10.0

[patterns]
emp1 = [0.1, 0.2, 0.3, 0.4]
"#;
        let inst = InstanceFile::parse(text).unwrap().to_instance().unwrap();
        assert_eq!(inst.demand[0].means, vec![1.0, 2.0, 3.0, 4.0]);
    }

    #[test]
    fn study_file_maps_to_spec() {
        let text = r#"
schema = 1

[study]
family = "ten-period-normal"
horizon = 7
scale = 8.0
seed = 99
openings = [[0, 0]]

[study.sampling]
mode = "lhs-patterns"
n = 10

[study.estimate]
cap = 50000
"#;
        let spec = StudyFile::parse(text).unwrap().to_spec().unwrap();
        assert_eq!(spec.horizon, 7);
        assert_eq!(spec.seed, 99);
        assert_eq!(spec.sampling, Sampling::LhsPatterns { n: 10 });
        assert_eq!(spec.estimate.cap, 50_000);
        assert_eq!(spec.gap_pair, GapPair::Sdp2VsHeuristic);
    }
}
