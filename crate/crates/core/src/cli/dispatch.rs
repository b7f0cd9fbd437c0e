use super::config::{Experiment, RunConfig};
use crate::analysis::{
    avoidance_probability, cross_variant, exact_avoidance, green_profile, lemma_suite, linear_variance_ratio,
    mean_square_vs_l, oracle_report, oracle_validate, standard_grid, synthetic_tail_recovery, tail_curve,
    two_point_decay, two_point_decay_averaged, LemmaGrid, Report,
};
use crate::error::Result;
use crate::model::{build_lattice, make_interaction, InteractionKind, Lattice, PinningSpec, Site};

/// Wells `(ε, a)` compared with their δ limit by the oracle experiment.
pub const CROSS_VARIANT_WELLS: [(f64, f64); 2] = [(6.0, 0.01), (8.0, 0.002)];

/// Thresholds of the synthetic tail-recovery check.
pub fn synthetic_grid() -> Vec<f64> {
    (0..10).map(|k| 2.0 + 0.25 * f64::from(k)).collect()
}

/// Runs the configured experiment and returns its report.
pub fn execute(cfg: &RunConfig) -> Result<Report> {
    let m = &cfg.model;
    let p = &cfg.params;
    let schedule = cfg.chain.schedule();
    match cfg.experiment {
        Experiment::OracleValidate => {
            let results = oracle_validate(&standard_grid()?, &schedule, p.scheme())?;
            let spec = make_interaction(InteractionKind::gaussian_nn(0.5))?;
            let cross = cross_variant(&Lattice::chain(3, 1, 0.0)?, "chain3", &spec, &CROSS_VARIANT_WELLS, p.scheme())?;
            Ok(oracle_report(&results, &cross))
        }
        Experiment::Pinv => {
            Ok(mean_square_vs_l(&m.spec()?, &cfg.pinning.spec()?, &m.l_list, m.boundary, &schedule)?.report())
        }
        Experiment::Tail => {
            let study = tail_curve(&m.spec()?, &cfg.pinning.spec()?, m.l, m.boundary, &p.t_grid, &schedule)?;
            let synthetic = synthetic_tail_recovery(1.0, &synthetic_grid(), 0.05, cfg.chain.seed)?;
            Ok(study.report(Some(&synthetic)))
        }
        Experiment::Twopoint => {
            let spec = m.spec()?;
            let study = if p.translation_average { two_point_decay_averaged } else { two_point_decay };
            let pinned = study(&spec, &cfg.pinning.spec()?, m.l, &p.distances, &schedule)?;
            let contrast = p
                .contrast
                .then(|| study(&spec, &PinningSpec::Free, m.l, &p.distances, &schedule))
                .transpose()?;
            Ok(pinned.report(contrast.as_ref()))
        }
        Experiment::Sgap => Ok(linear_variance_ratio(
            &m.spec()?,
            &cfg.pinning.spec()?,
            &m.l_list,
            &p.box_half_widths,
            &schedule,
        )?
        .report()),
        Experiment::Avoidance => {
            let spec = m.spec()?;
            let pinning = cfg.pinning.spec()?;
            let study = avoidance_probability(&spec, &pinning, m.l, &p.sizes, &schedule)?;
            let mut lattices = vec![
                ("chain4", Lattice::chain(4, 1, 0.0)?),
                (
                    "square2",
                    Lattice::from_sites(vec![Site(0, 0), Site(1, 0), Site(0, 1), Site(1, 1)], 1, 0.0)?,
                ),
            ];
            if spec.is_gaussian() && matches!(pinning, PinningSpec::Delta { .. }) {
                lattices.push(("box3", build_lattice(1, 1, 0.0)?));
            }
            let mut exact = Vec::new();
            for (label, lat) in &lattices {
                exact.extend(exact_avoidance(lat, label, &spec, &pinning, p.scheme())?);
            }
            Ok(study.report(&exact))
        }
        Experiment::GreenProfile => Ok(green_profile(
            &m.spec()?,
            &p.n_divergence,
            &p.n_exit,
            p.n_paths,
            cfg.chain.seed,
        )?
        .report()),
        Experiment::LemmaSuite => {
            let grid = LemmaGrid {
                scheme: p.scheme(),
                ..LemmaGrid::standard()?
            };
            Ok(lemma_suite(&grid)?.report())
        }
    }
}
