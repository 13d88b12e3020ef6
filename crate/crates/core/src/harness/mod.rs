//! Experiment registry, report assembly and the shared scenario caches.

mod config;
mod family;
mod paths;
mod report;
mod trees;

pub use config::{Format, LabConfig, MAX_TREE_STEPS};
pub use report::{emit_report, raw_samples_csv, report_csv, report_json, Report};
pub use trees::{tree_sweep, SweepLevel};

use crate::brownian::scenario::{
    first_passage_batch, gamma_batch, FirstPassageRecord, GammaRecord,
};
use crate::error::{LabError, Result};
use crate::stats::{KsResult, McEstimate};
use serde::Serialize;
use std::collections::BTreeMap;
use std::fmt::Display;
use std::sync::OnceLock;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Pass,
    Fail,
    /// Recorded without a pass/fail claim.
    Observed,
}

impl Verdict {
    pub fn as_str(&self) -> &'static str {
        match self {
            Verdict::Pass => "pass",
            Verdict::Fail => "fail",
            Verdict::Observed => "observed",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Relation {
    #[serde(rename = "<")]
    Lt,
    #[serde(rename = "<=")]
    Le,
    #[serde(rename = ">")]
    Gt,
    #[serde(rename = ">=")]
    Ge,
}

impl Relation {
    pub fn holds(&self, value: f64, bound: f64) -> bool {
        match self {
            Relation::Lt => value < bound,
            Relation::Le => value <= bound,
            Relation::Gt => value > bound,
            Relation::Ge => value >= bound,
        }
    }

    pub fn symbol(&self) -> &'static str {
        match self {
            Relation::Lt => "<",
            Relation::Le => "<=",
            Relation::Gt => ">",
            Relation::Ge => ">=",
        }
    }
}

/// One thresholded comparison.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub relation: Relation,
    pub bound: f64,
    pub pass: bool,
}

/// Registry entry.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ExperimentInfo {
    pub id: &'static str,
    pub anchor: &'static str,
    pub title: &'static str,
}

pub const REGISTRY: [ExperimentInfo; 14] = [
    ExperimentInfo {
        id: "E1",
        anchor: "Theorem caracter1",
        title: "tree-characterizations: the three forms of T(M) and E[M_rho] - E[M_N] = T(M)",
    },
    ExperimentInfo {
        id: "E2",
        anchor: "Proposition kunitwatanbe",
        title: "Kunita-Watanabe split against mu and the S1 membership predicate",
    },
    ExperimentInfo {
        id: "E3",
        anchor: "Progressive and honest enlargement decompositions",
        title: "enlargement drifts on trees, with bracket and left-limit conventions",
    },
    ExperimentInfo {
        id: "E4",
        anchor: "Lemma azemgeneral",
        title: "exp-law: A_infinity is Exp(1) for the last zero before T1 and before 1",
    },
    ExperimentInfo {
        id: "E5",
        anchor: "Theorem lag / represdephi",
        title: "Laguerre gaps E[M_rho] - E[M_infinity] at the last zero before T1",
    },
    ExperimentInfo {
        id: "E6",
        anchor: "Formula casbrown",
        title: "odd and even f: E[f(B1) | F_gamma]",
    },
    ExperimentInfo {
        id: "E7",
        anchor: "Proposition on M^{f,1}, M^{f,2}, M^{f,3}",
        title: "M^{f,perp}: direct value versus the displayed decomposition",
    },
    ExperimentInfo {
        id: "E8",
        anchor: "Proposition corporgam",
        title: "corporgam: N^h at gamma against h(gamma)",
    },
    ExperimentInfo {
        id: "E9",
        anchor: "Balayage and stopped Brownian motion propositions",
        title: "balayage martingale x(g_{t^T1}) B_{t^T1}",
    },
    ExperimentInfo {
        id: "E10",
        anchor: "Propositions mesmart, maintm, expect, supremum; Corollary corimport",
        title: "the family M^phi = Z phi_hat(A) + (1 - Z) phi(A)",
    },
    ExperimentInfo {
        id: "E11",
        anchor: "Imhof law and independence of (m, sgn B1) from gamma",
        title: "Rayleigh law of |B1|/sqrt(1 - gamma) and independence",
    },
    ExperimentInfo {
        id: "E12",
        anchor: "Propositions propangulaire, resolutiondeux",
        title: "E[h(gamma) 1_{gamma>t} | F_t] against integrals of h along lambda",
    },
    ExperimentInfo {
        id: "E13",
        anchor: "Theorem resolutionune",
        title: "post-L bracket condition for S2 members on trees",
    },
    ExperimentInfo {
        id: "E14",
        anchor: "Pseudo-stopping times proposition",
        title: "pseudo-stopping search on small trees",
    },
];

pub fn lookup(id: &str) -> Result<&'static ExperimentInfo> {
    REGISTRY
        .iter()
        .find(|e| e.id.eq_ignore_ascii_case(id))
        .ok_or_else(|| LabError::UnknownExperiment(id.to_string()))
}

/// An executed experiment. Maps are ordered so the serialized form is
/// stable.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Experiment {
    pub id: String,
    pub anchor: String,
    pub title: String,
    pub verdict: Verdict,
    pub parameters: BTreeMap<String, String>,
    pub checks: Vec<Check>,
    pub values: BTreeMap<String, f64>,
    pub estimates: BTreeMap<String, McEstimate>,
    pub ks: BTreeMap<String, KsResult>,
    pub notes: Vec<String>,
}

impl Experiment {
    fn new(info: &ExperimentInfo) -> Self {
        Experiment {
            id: info.id.into(),
            anchor: info.anchor.into(),
            title: info.title.into(),
            verdict: Verdict::Pass,
            parameters: BTreeMap::new(),
            checks: Vec::new(),
            values: BTreeMap::new(),
            estimates: BTreeMap::new(),
            ks: BTreeMap::new(),
            notes: Vec::new(),
        }
    }

    fn param(&mut self, key: &str, v: impl Display) {
        self.parameters.insert(key.into(), v.to_string());
    }

    fn check(
        &mut self,
        name: impl Into<String>,
        value: f64,
        relation: Relation,
        bound: f64,
    ) -> bool {
        let pass = relation.holds(value, bound);
        self.checks.push(Check {
            name: name.into(),
            value,
            relation,
            bound,
            pass,
        });
        pass
    }

    fn value(&mut self, name: impl Into<String>, v: f64) {
        self.values.insert(name.into(), v);
    }

    fn estimate(&mut self, name: impl Into<String>, e: McEstimate) {
        self.estimates.insert(name.into(), e);
    }

    fn ks(&mut self, name: impl Into<String>, k: KsResult) {
        self.ks.insert(name.into(), k);
    }

    fn note(&mut self, s: impl Into<String>) {
        self.notes.push(s.into());
    }

    pub fn all_checks_pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn check_named(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    /// Fail on any failed check, else pass.
    fn settle(mut self) -> Self {
        self.verdict = if self.all_checks_pass() {
            Verdict::Pass
        } else {
            Verdict::Fail
        };
        self
    }

    /// Fail on any failed check, else observed.
    fn settle_observed(mut self) -> Self {
        self.verdict = if self.all_checks_pass() {
            Verdict::Observed
        } else {
            Verdict::Fail
        };
        self
    }
}

/// Runs experiments against one configuration; the scenario batches are
/// simulated once and shared.
pub struct Lab {
    config: LabConfig,
    gamma: OnceLock<Result<Vec<GammaRecord>>>,
    passage: OnceLock<Result<Vec<FirstPassageRecord>>>,
    sweep: OnceLock<Vec<SweepLevel>>,
}

impl Lab {
    pub fn new(config: LabConfig) -> Result<Self> {
        config.validate()?;
        Ok(Lab {
            config,
            gamma: OnceLock::new(),
            passage: OnceLock::new(),
            sweep: OnceLock::new(),
        })
    }

    pub fn config(&self) -> &LabConfig {
        &self.config
    }

    pub fn gamma_records(&self) -> Result<&[GammaRecord]> {
        self.gamma
            .get_or_init(|| gamma_batch(&self.config.scenario()))
            .as_deref()
            .map_err(Clone::clone)
    }

    pub fn passage_records(&self) -> Result<&[FirstPassageRecord]> {
        self.passage
            .get_or_init(|| first_passage_batch(&self.config.scenario()))
            .as_deref()
            .map_err(Clone::clone)
    }

    fn sweep(&self) -> &[SweepLevel] {
        self.sweep
            .get_or_init(|| tree_sweep(self.config.seed, self.config.tree_steps))
    }

    fn scenario_params(&self, e: &mut Experiment) {
        e.param("n", self.config.n);
        e.param("dt", self.config.dt);
        e.param("seed", self.config.seed);
    }

    pub fn run(&self, id: &str) -> Result<Experiment> {
        let info = lookup(id)?;
        let e = Experiment::new(info);
        match info.id {
            "E1" => trees::e1(self, e),
            "E2" => trees::e2(self, e),
            "E3" => trees::e3(self, e),
            "E4" => paths::e4(self, e),
            "E5" => paths::e5(self, e),
            "E6" => paths::e6(self, e),
            "E7" => paths::e7(self, e),
            "E8" => paths::e8(self, e),
            "E9" => paths::e9(self, e),
            "E10" => family::e10(self, e),
            "E11" => paths::e11(self, e),
            "E12" => paths::e12(self, e),
            "E13" => trees::e13(self, e),
            "E14" => trees::e14(self, e),
            _ => unreachable!("registry and dispatch agree"),
        }
    }

    pub fn run_all(&self) -> Result<Vec<Experiment>> {
        REGISTRY.iter().map(|e| self.run(e.id)).collect()
    }

    /// `(path_id, functional, value)` rows of every batch simulated so far.
    pub fn raw_rows(&self) -> Vec<(u64, String, f64)> {
        let mut rows = Vec::new();
        if let Some(Ok(g)) = self.gamma.get() {
            for r in g {
                for (k, v) in r.functionals() {
                    rows.push((r.path_id, format!("gamma.{k}"), v));
                }
            }
        }
        if let Some(Ok(p)) = self.passage.get() {
            for r in p {
                for (k, v) in r.functionals() {
                    rows.push((r.path_id, format!("first_passage.{k}"), v));
                }
            }
        }
        rows
    }
}

/// Runs one experiment on a fresh lab.
pub fn run_experiment(id: &str, config: &LabConfig) -> Result<Experiment> {
    Lab::new(config.clone())?.run(id)
}
