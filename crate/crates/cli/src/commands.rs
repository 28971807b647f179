//! The four subcommands. Each turns layered settings into a [`Table`].

use std::fs;
use std::path::Path;

use num_complex::Complex64;
use wavepacket_core::oracle::{self, cache_key, load_cache, save_cache, OracleError};
use wavepacket_core::{pole_table, pole_table_for, PoleSelection, Propagator, PsiBreakdown, TermSelector};

use crate::config::{ConfigError, OracleSettings, RunConfig, Settings};
use crate::output::{Cell, Table};
use crate::CliError;

const TERM_NAMES: [&str; 5] = ["incidence", "reflection", "transmission", "resonance", "correction"];
const DEFAULT_N_MAX: usize = 8;
const COMPARE_WINDOW: f64 = 30.0;

fn terms(b: &PsiBreakdown) -> [Complex64; 5] {
    [b.incidence, b.reflection, b.transmission, b.resonance, b.correction]
}

fn warn(prop: &Propagator) {
    for w in prop.warnings() {
        eprintln!("warning: {w}");
    }
}

/// `psi`: ψ on the configured momentum grid.
pub fn psi(settings: &Settings) -> Result<Table, CliError> {
    let cfg = RunConfig::from_settings(settings)?;
    let ps = cfg.checked_momenta()?;
    let selector = cfg.selector();
    let poles = pole_table_for(&cfg.barrier, &cfg.packet, selector.poles).map_err(CliError::numerical)?;
    let prop = Propagator::new(cfg.barrier, cfg.packet, cfg.t, poles, selector).map_err(CliError::numerical)?;
    warn(&prop);
    let values = prop.psi_grid(&ps).map_err(CliError::numerical)?;

    let mut columns = vec!["p", "re_psi", "im_psi", "abs2_psi"];
    let breakdown_columns =
        ["abs2_incidence", "abs2_reflection", "abs2_transmission", "abs2_resonance", "abs2_correction"];
    if cfg.breakdown {
        columns.extend(breakdown_columns);
    }
    let mut table = Table::new("psi", cfg.provenance(), &columns);
    for (&p, b) in ps.iter().zip(&values) {
        let mut row: Vec<Cell> = vec![p.into(), b.total.re.into(), b.total.im.into(), b.total.norm_sqr().into()];
        if cfg.breakdown {
            row.extend(terms(b).iter().map(|c| Cell::Float(c.norm_sqr())));
        }
        table.rows.push(row);
    }
    Ok(table)
}

/// `poles`: the resonance pole table of the barrier.
pub fn poles(settings: &Settings) -> Result<Table, CliError> {
    let cfg = RunConfig::from_settings(settings)?;
    let n_max = settings.n_max.unwrap_or(DEFAULT_N_MAX);
    if n_max == 0 {
        return Err(ConfigError::invalid("n-max", "must be at least 1").into());
    }
    let poles = pole_table(&cfg.barrier, n_max).map_err(CliError::numerical)?;
    let provenance = vec![
        ("preset", cfg.preset.name().to_string()),
        ("V0", cfg.barrier.v0.to_string()),
        ("d", cfg.barrier.d.to_string()),
        ("m", cfg.barrier.m.to_string()),
        ("hbar", cfg.barrier.hbar.to_string()),
        ("n-max", n_max.to_string()),
    ];
    let mut table = Table::new("poles", provenance, &["seed", "re_p", "im_p", "re_f", "im_f", "residual"]);
    table.summary.push(("count".into(), Cell::Int(poles.len() as i64)));
    for pole in &poles {
        table.rows.push(vec![
            Cell::Int(pole.seed.unwrap_or(0)),
            pole.p.re.into(),
            pole.p.im.into(),
            pole.f_factor.re.into(),
            pole.f_factor.im.into(),
            pole.residual.into(),
        ]);
    }
    Ok(table)
}

/// `figure`: the exact curve and the preset's approximations.
pub fn figure(settings: &Settings) -> Result<Table, CliError> {
    let cfg = RunConfig::from_settings(settings)?;
    let ps = cfg.checked_momenta()?;
    let approximations = cfg.preset.approximations();
    let seeds = approximations
        .iter()
        .filter_map(|(_, sel)| match sel.poles {
            PoleSelection::Seeds(k) => Some(k),
            _ => None,
        })
        .max()
        .unwrap_or(0);
    let poles = pole_table_for(&cfg.barrier, &cfg.packet, PoleSelection::Seeds(seeds)).map_err(CliError::numerical)?;

    let exact = Propagator::new(cfg.barrier, cfg.packet, cfg.t, poles.clone(), TermSelector::exact())
        .map_err(CliError::numerical)?;
    warn(&exact);
    let exact_values = exact.psi_grid(&ps).map_err(CliError::numerical)?;
    let curves: Vec<Vec<PsiBreakdown>> = approximations
        .iter()
        .map(|(_, sel)| {
            Propagator::new(cfg.barrier, cfg.packet, cfg.t, poles.clone(), *sel)
                .and_then(|prop| prop.psi_grid(&ps))
                .map_err(CliError::numerical)
        })
        .collect::<Result<_, _>>()?;

    let names: Vec<String> = approximations.iter().map(|(name, _)| format!("abs2_{name}")).collect();
    let mut columns = vec!["p", "re_exact", "im_exact", "abs2_exact"];
    columns.extend(names.iter().map(String::as_str));
    let mut provenance = cfg.provenance();
    provenance.retain(|(k, _)| !matches!(*k, "n-poles" | "n-corrections"));
    let mut table = Table::new("figure", provenance, &columns);

    let peak = exact_values.iter().map(|b| b.total.norm_sqr()).fold(0.0, f64::max);
    for ((name, _), curve) in approximations.iter().zip(&curves) {
        let worst = curve
            .iter()
            .zip(&exact_values)
            .map(|(a, e)| (a.total.norm_sqr() - e.total.norm_sqr()).abs())
            .fold(0.0, f64::max);
        table.summary.push((format!("max_diff_over_peak_{name}"), Cell::Float(worst / peak)));
    }
    for (k, (&p, e)) in ps.iter().zip(&exact_values).enumerate() {
        let mut row: Vec<Cell> = vec![p.into(), e.total.re.into(), e.total.im.into(), e.total.norm_sqr().into()];
        row.extend(curves.iter().map(|c| Cell::Float(c[k].total.norm_sqr())));
        table.rows.push(row);
    }
    Ok(table)
}

/// Layers `compare` settings; its default window is `[-30, 30]`.
pub fn compare_defaults(flags: Settings, config: Option<&Path>) -> Result<Settings, ConfigError> {
    let defaults = Settings { p_lo: Some(-COMPARE_WINDOW), p_hi: Some(COMPARE_WINDOW), ..Settings::default() };
    flags.layered_with(config, defaults)
}

struct Reference {
    p_values: Vec<f64>,
    psi_values: Vec<Complex64>,
    refinement_ratio: f64,
    norm: f64,
}

fn oracle_error(err: OracleError) -> CliError {
    match err {
        OracleError::InvalidGrid(msg) => ConfigError::invalid("grid", msg).into(),
        other => CliError::numerical(other),
    }
}

fn reference(cfg: &RunConfig, oracle: &OracleSettings, cache_dir: Option<&Path>) -> Result<Reference, CliError> {
    let grid = oracle.grid(&cfg.barrier, cfg.t);
    grid.validate(&cfg.packet, &cfg.barrier).map_err(oracle_error)?;
    let p_max = cfg.p_lo.abs().max(cfg.p_hi.abs());
    let cache_path =
        cache_dir.map(|dir| dir.join(format!("{}.oracle", cache_key(&cfg.packet, &cfg.barrier, cfg.t, &grid, p_max))));
    if let Some(path) = &cache_path {
        if path.exists() {
            match load_cache(path, &cfg.packet, &cfg.barrier, cfg.t, &grid, p_max) {
                Ok(cached) => {
                    return Ok(Reference {
                        p_values: cached.result.p_values,
                        psi_values: cached.result.psi_values,
                        refinement_ratio: cached.refinement_ratio,
                        norm: cached.result.norm,
                    })
                }
                Err(err) => eprintln!("warning: ignoring cache: {err}"),
            }
        }
    }
    let converged = oracle::converged(&cfg.packet, &cfg.barrier, cfg.t, &grid, p_max).map_err(oracle_error)?;
    if let (Some(path), Some(dir)) = (&cache_path, cache_dir) {
        let saved = fs::create_dir_all(dir)
            .map_err(OracleError::from)
            .and_then(|_| save_cache(path, &converged, &cfg.packet, &cfg.barrier, &grid, p_max));
        if let Err(err) = saved {
            eprintln!("warning: could not write cache: {err}");
        }
    }
    let norm = converged.norms[converged.norms.len() - 1];
    Ok(Reference {
        p_values: converged.p_values,
        psi_values: converged.psi_values,
        refinement_ratio: converged.refinement_ratio,
        norm,
    })
}

/// `compare`: exact mode against the converged finite-difference reference.
pub fn compare(settings: &Settings) -> Result<Table, CliError> {
    let cfg = RunConfig::from_settings(settings)?;
    let oracle_settings = OracleSettings::from_settings(settings)?;
    let reference = reference(&cfg, &oracle_settings, settings.cache_dir.as_deref())?;

    let (ps, ref_values): (Vec<f64>, Vec<Complex64>) = reference
        .p_values
        .iter()
        .zip(&reference.psi_values)
        .filter(|(&p, _)| p >= cfg.p_lo && p <= cfg.p_hi && p != 0.0)
        .map(|(&p, &v)| (p, v))
        .unzip();
    if ps.is_empty() {
        return Err(ConfigError::invalid("p-lo", "the window holds no oracle momenta").into());
    }
    let prop = Propagator::exact(cfg.barrier, cfg.packet, cfg.t).map_err(CliError::numerical)?;
    warn(&prop);
    let values = prop.psi_grid(&ps).map_err(CliError::numerical)?;
    let analytic: Vec<Complex64> = values.iter().map(|b| b.total).collect();
    let report = oracle::compare(&ps, &analytic, &ref_values).map_err(CliError::numerical)?;

    let mut provenance = cfg.provenance();
    provenance.retain(|(k, _)| !matches!(*k, "n-points" | "n-poles" | "n-corrections"));
    provenance.push(("half-width", oracle_settings.half_width.to_string()));
    provenance.push(("n-x", oracle_settings.n_x.to_string()));
    provenance.push(("n-t", oracle_settings.n_t.to_string()));
    let mut table = Table::new("compare", provenance, &["p", "re_analytic", "im_analytic", "re_oracle", "im_oracle"]);
    table.summary = vec![
        ("relative_l2".into(), report.relative_l2.into()),
        ("linf_over_peak".into(), report.linf_over_peak.into()),
        ("worst_p".into(), report.worst_p.into()),
        ("points".into(), Cell::Int(report.points as i64)),
        ("refinement_ratio".into(), reference.refinement_ratio.into()),
        ("oracle_norm".into(), reference.norm.into()),
    ];
    let total_norm = analytic.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
    for (k, name) in TERM_NAMES.iter().enumerate() {
        let norm = values.iter().map(|b| terms(b)[k].norm_sqr()).sum::<f64>().sqrt();
        table.summary.push((format!("share_{name}"), Cell::Float(norm / total_norm)));
    }
    for ((&p, a), r) in ps.iter().zip(&analytic).zip(&ref_values) {
        table.rows.push(vec![p.into(), a.re.into(), a.im.into(), r.re.into(), r.im.into()]);
    }
    Ok(table)
}
