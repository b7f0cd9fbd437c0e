use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::estimators::{pinned_bilinears, pinned_gaussian_probe, Bilinear};
use super::fit::{fit_decay, DecayFit, DecayModel};
use super::report::{Check, Report, Table, Verdict};
use crate::error::{Error, Result};
use crate::model::{build_lattice, InteractionSpec, Lattice, PinningSpec, Site};
use crate::oracle::PinnedSet;
use crate::sampler::{run_chain, ChainConfig, Estimate, Probe, Schedule};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Profile {
    pub name: String,
    /// Number of sites of a uniform sub-box profile; zero otherwise.
    pub box_size: usize,
    pub alpha: Vec<(usize, f64)>,
}

impl Profile {
    pub fn norm2(&self) -> f64 {
        self.alpha.iter().map(|(_, a)| a * a).sum()
    }
}

/// Single-site indicator at the centre, uniform profiles on centred sub-boxes
/// of the given half-widths, and a seeded random ±1 profile on the whole box.
pub fn standard_profiles(lattice: &Lattice, box_half_widths: &[i32], seed: u64) -> Result<Vec<Profile>> {
    let c = lattice.center();
    let Site(cx, cy) = lattice.site(c);
    let mut out = vec![Profile {
        name: "site".into(),
        box_size: 0,
        alpha: vec![(c, 1.0)],
    }];
    for &k in box_half_widths {
        let mut alpha = Vec::new();
        for y in cy - k..=cy + k {
            for x in cx - k..=cx + k {
                let i = lattice
                    .index_of(Site(x, y))
                    .ok_or_else(|| Error::param("box_half_widths", format!("sub-box of half-width {k} leaves the lattice")))?;
                alpha.push((i, 1.0));
            }
        }
        alpha.sort_by_key(|a| a.0);
        out.push(Profile {
            name: format!("box{}", alpha.len()),
            box_size: alpha.len(),
            alpha,
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    out.push(Profile {
        name: "random".into(),
        box_size: 0,
        alpha: (0..lattice.len())
            .map(|i| (i, if rng.random::<bool>() { 1.0 } else { -1.0 }))
            .collect(),
    });
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProfileRatio {
    pub name: String,
    pub box_size: usize,
    /// `var(⟨α,h⟩) / ⟨α,α⟩`
    pub ratio: Estimate,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SgapLevel {
    pub l: i32,
    pub profiles: Vec<ProfileRatio>,
}

impl SgapLevel {
    pub fn max_ratio(&self) -> &ProfileRatio {
        self.profiles
            .iter()
            .max_by(|a, b| a.ratio.mean.total_cmp(&b.ratio.mean))
            .expect("at least one profile")
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SgapStudy {
    pub pinning: PinningSpec,
    pub levels: Vec<SgapLevel>,
    /// Affine-in-log fit of the maximal ratio over the ladder.
    pub ratio_fit: Option<DecayFit>,
    /// Exact unpinned ratio of the largest sub-box profile, Gaussian only.
    pub unpinned: Vec<(i32, f64)>,
    pub unpinned_fit: Option<DecayFit>,
}

fn scale(e: Estimate, by: f64) -> Estimate {
    Estimate {
        mean: e.mean / by,
        std_error: e.std_error / by,
        ..e
    }
}

/// `var(⟨α,h⟩)/⟨α,α⟩` for the standard profiles on each `Λ_L` with zero
/// boundary, where the mean vanishes by the `h → −h` symmetry. Gaussian δ-pinned
/// fields use the exact conditional variance given the pinned set.
pub fn linear_variance_ratio(
    spec: &InteractionSpec,
    pinning: &PinningSpec,
    l_list: &[i32],
    box_half_widths: &[i32],
    schedule: &Schedule,
) -> Result<SgapStudy> {
    if l_list.is_empty() || box_half_widths.is_empty() {
        return Err(Error::param("l_list", "need sizes and sub-boxes"));
    }
    let mut levels = Vec::new();
    let mut unpinned = Vec::new();
    let largest = *box_half_widths.iter().max().unwrap();
    for &l in l_list {
        let lattice = build_lattice(l, spec.range(), 0.0)?;
        let profiles = standard_profiles(&lattice, box_half_widths, schedule.seed)?;
        let probes: Vec<Probe> = match (*pinning, spec.is_gaussian()) {
            (PinningSpec::Delta { .. }, true) => vec![pinned_gaussian_probe(
                &lattice,
                spec,
                profiles
                    .iter()
                    .map(|p| Bilinear::square(p.name.clone(), p.alpha.clone()))
                    .collect(),
            )],
            _ => profiles.iter().map(|p| Probe::LinearSquare(p.alpha.clone())).collect(),
        };
        let sched = Schedule {
            seed: schedule.seed ^ (l as u64).wrapping_mul(0x2545_f491),
            ..schedule.clone()
        };
        let r = run_chain(&ChainConfig::new(lattice.clone(), spec.clone(), *pinning, sched), &probes)?;
        levels.push(SgapLevel {
            l,
            profiles: profiles
                .iter()
                .zip(&r.estimates)
                .map(|(p, &e)| ProfileRatio {
                    name: p.name.clone(),
                    box_size: p.box_size,
                    ratio: scale(e, p.norm2()),
                })
                .collect(),
        });
        if spec.is_gaussian() {
            let p = profiles.iter().find(|p| p.box_size == ((2 * largest + 1) * (2 * largest + 1)) as usize).unwrap();
            let v = pinned_bilinears(
                &lattice,
                spec,
                &PinnedSet::empty(lattice.len()),
                &[Bilinear::square("u", p.alpha.clone())],
            )?[0];
            unpinned.push((l, v / p.norm2()));
        }
    }
    let ratio_fit = (levels.len() >= 4)
        .then(|| {
            let xs: Vec<f64> = levels.iter().map(|l| f64::from(l.l)).collect();
            let ys: Vec<f64> = levels.iter().map(|l| l.max_ratio().ratio.mean).collect();
            let ses: Vec<f64> = levels.iter().map(|l| l.max_ratio().ratio.std_error).collect();
            fit_decay(&xs, &ys, Some(&ses), DecayModel::AffineInLog)
        })
        .transpose()?;
    let unpinned_fit = (unpinned.len() >= 4)
        .then(|| {
            let xs: Vec<f64> = unpinned.iter().map(|u| f64::from(u.0)).collect();
            let ys: Vec<f64> = unpinned.iter().map(|u| u.1).collect();
            fit_decay(&xs, &ys, None, DecayModel::AffineInLog)
        })
        .transpose()?;
    Ok(SgapStudy {
        pinning: *pinning,
        levels,
        ratio_fit,
        unpinned,
        unpinned_fit,
    })
}

impl SgapStudy {
    /// Largest pairwise z-score among the sub-box ratios at the largest `L`.
    pub fn sub_box_spread(&self) -> f64 {
        let level = self.levels.last().expect("nonempty ladder");
        let boxes: Vec<&ProfileRatio> = level.profiles.iter().filter(|p| p.box_size > 0).collect();
        let mut worst: f64 = 0.0;
        for (k, a) in boxes.iter().enumerate() {
            for b in &boxes[k + 1..] {
                worst = worst.max(a.ratio.z_score(&b.ratio));
            }
        }
        worst
    }

    pub fn sub_box_verdict(&self) -> Verdict {
        Verdict::from_bool(self.sub_box_spread() <= 3.0)
    }

    pub fn growth_verdict(&self) -> Verdict {
        match &self.ratio_fit {
            Some(f) => Verdict::from_bool(f.rate().ci_contains(0.0)),
            None => Verdict::Underpowered,
        }
    }

    pub fn unpinned_verdict(&self) -> Option<Verdict> {
        self.unpinned_fit
            .as_ref()
            .map(|f| Verdict::from_bool(f.rate().value > 0.0 && f.rate().ci_excludes_zero()))
    }

    pub fn report(&self) -> Report {
        let mut table = Table::new(&["L", "profile", "box_size", "ratio", "std_error", "tau_int"]);
        for level in &self.levels {
            for p in &level.profiles {
                table.push(vec![
                    level.l.into(),
                    p.name.clone().into(),
                    p.box_size.into(),
                    p.ratio.mean.into(),
                    p.ratio.std_error.into(),
                    p.ratio.tau_int.into(),
                ]);
            }
        }
        for &(l, v) in &self.unpinned {
            table.push(vec![l.into(), "unpinned-box".into(), 0usize.into(), v.into(), 0.0.into(), 0.5.into()]);
        }
        let mut checks = vec![
            Check::new(
                "sub-box variance x |box| constant within 3 SE",
                self.sub_box_verdict(),
                format!("largest pairwise z = {:.3}", self.sub_box_spread()),
            ),
            Check::new(
                "max ratio shows no growth in L",
                self.growth_verdict(),
                self.ratio_fit.as_ref().map_or("fewer than 4 sizes".into(), |f| {
                    format!("slope {:.4} CI [{:.4}, {:.4}]", f.rate().value, f.rate().ci[0], f.rate().ci[1])
                }),
            ),
        ];
        if let (Some(v), Some(f)) = (self.unpinned_verdict(), &self.unpinned_fit) {
            checks.push(Check::new(
                "unpinned sub-box ratio grows with L",
                v,
                format!("slope {:.4} CI [{:.4}, {:.4}]", f.rate().value, f.rate().ci[0], f.rate().ci[1]),
            ));
        }
        Report::new(
            "sgap",
            checks,
            serde_json::json!({ "ratio_fit": self.ratio_fit, "unpinned_fit": self.unpinned_fit }),
            table,
        )
    }
}
