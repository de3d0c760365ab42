//! Named experiment grids. Every case is an ordinary config document.

use crate::config::{parse_config, ExperimentConfig, DEFAULT_MAX_ITER};
use crate::error::{HarnessError, Result};

pub struct Preset {
    pub name: &'static str,
    pub description: &'static str,
}

pub const PRESETS: &[Preset] = &[
    Preset {
        name: "fig1",
        description: "p in {0.2, 0.8}, k = 10, n in {30, 40, 50, 60, 70} of 100 workers, block-list off and on",
    },
    Preset {
        name: "fig2",
        description: "adversary rate sweep p in {0.2, 0.4, 0.6, 0.8}, k = 10, n = 10 of 100, block-list off and on",
    },
    Preset {
        name: "fig3",
        description: "category sweep k in {2, 5, 10, 20, 40} plus random offsets, p = 0.8, n = 10 of 100, block-list off and on",
    },
    Preset {
        name: "fig4",
        description: "inconsistent system with uniform(1e-4) noise, p = 0.8, k = 10, n in {30, ..., 70}, block-list off and on",
    },
    Preset {
        name: "table2",
        description: "exact mode probabilities for N = 100, n = 5 over (p, k) pairs",
    },
    Preset {
        name: "table3",
        description: "exact mode probabilities for N = 100, k = 5, n in {10, 15, 20}",
    },
    Preset {
        name: "table4",
        description: "block-list precision and recall, p = 0.8, k = 10, n in {30, ..., 70}",
    },
    Preset {
        name: "honest",
        description: "all-honest pool, one seed; reduces to plain randomized Kaczmarz",
    },
];

#[derive(Debug, Clone, PartialEq)]
pub struct PresetCase {
    pub label: String,
    pub document: String,
}

impl PresetCase {
    pub fn config(&self) -> Result<ExperimentConfig> {
        parse_config(&self.document)
    }
}

const FIG_N: [usize; 5] = [30, 40, 50, 60, 70];

#[derive(Clone)]
struct Case {
    rate: f64,
    k: usize,
    n: usize,
    noise: f64,
    error: &'static str,
    blocklist: bool,
    simulate: bool,
    seeds: Vec<u64>,
}

impl Default for Case {
    fn default() -> Self {
        Self {
            rate: 0.8,
            k: 10,
            n: 10,
            noise: 0.0,
            error: "constant",
            blocklist: false,
            simulate: true,
            seeds: vec![0, 1, 2, 3, 4],
        }
    }
}

impl Case {
    fn document(&self) -> String {
        let seeds: Vec<String> = self.seeds.iter().map(u64::to_string).collect();
        let mut doc = format!(
            "[problem]\nm = 1000\nd = 100\nnoise = {:?}\nseed = 0\n\n\
             [pool]\nworkers = 100\nadversary_rate = {:?}\ncategories = {}\nerror = \"{}\"\n\n\
             [solve]\nn = {}\nmax_iter = {DEFAULT_MAX_ITER}\n",
            self.noise, self.rate, self.k, self.error, self.n
        );
        if self.blocklist {
            doc.push_str("blocklist = true\npolicy = \"fraction\"\ntau = 0.5\nperiod = 100\n");
        }
        doc.push_str(&format!(
            "\n[run]\nseeds = [{}]\nsimulate = {}\n",
            seeds.join(", "),
            self.simulate
        ));
        doc
    }

    fn label(&self) -> String {
        let mut label = format!("p{}_k{}_n{}", self.rate, self.k, self.n);
        if self.error == "random" {
            label = format!("p{}_krandom_n{}", self.rate, self.n);
        }
        if self.noise > 0.0 {
            label.push_str("_noisy");
        }
        if self.simulate {
            label.push_str(if self.blocklist { "_block" } else { "_noblock" });
        }
        label
    }
}

fn both_blocklist_modes(cases: Vec<Case>) -> Vec<Case> {
    cases
        .into_iter()
        .flat_map(|c| {
            [false, true].map(|blocklist| Case {
                blocklist,
                ..c.clone()
            })
        })
        .collect()
}

fn cases(name: &str) -> Result<Vec<Case>> {
    let base = Case::default();
    let out = match name {
        "fig1" => both_blocklist_modes(
            [0.2, 0.8]
                .into_iter()
                .flat_map(|rate| FIG_N.map(|n| Case { rate, n, ..base.clone() }))
                .collect(),
        ),
        "fig2" => both_blocklist_modes(
            [0.2, 0.4, 0.6, 0.8]
                .into_iter()
                .map(|rate| Case { rate, ..base.clone() })
                .collect(),
        ),
        "fig3" => {
            let mut v: Vec<Case> = [2, 5, 10, 20, 40].into_iter().map(|k| Case { k, ..base.clone() }).collect();
            v.push(Case {
                k: 1,
                error: "random",
                ..base.clone()
            });
            both_blocklist_modes(v)
        }
        "fig4" => both_blocklist_modes(
            FIG_N
                .into_iter()
                .map(|n| Case {
                    n,
                    noise: 1e-4,
                    ..base.clone()
                })
                .collect(),
        ),
        "table2" => [(0.8, 5), (0.8, 10), (0.8, 15), (0.2, 3), (0.2, 5), (0.2, 10), (0.2, 15)]
            .into_iter()
            .map(|(rate, k)| Case {
                rate,
                k,
                n: 5,
                simulate: false,
                ..base.clone()
            })
            .collect(),
        "table3" => [0.8, 0.2]
            .into_iter()
            .flat_map(|rate| {
                [10, 15, 20].map(|n| Case {
                    rate,
                    k: 5,
                    n,
                    simulate: false,
                    ..base.clone()
                })
            })
            .collect(),
        "table4" => FIG_N
            .into_iter()
            .map(|n| Case {
                n,
                blocklist: true,
                ..base.clone()
            })
            .collect(),
        "honest" => vec![Case {
            rate: 0.0,
            k: 0,
            seeds: vec![0],
            ..base
        }],
        other => return Err(HarnessError::UnknownPreset(other.to_string())),
    };
    Ok(out)
}

/// Expands a preset into its config documents.
pub fn preset_cases(name: &str) -> Result<Vec<PresetCase>> {
    Ok(cases(name)?
        .into_iter()
        .map(|c| PresetCase {
            label: c.label(),
            document: c.document(),
        })
        .collect())
}
