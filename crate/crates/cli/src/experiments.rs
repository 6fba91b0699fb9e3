//! The experiments. Each returns its output files in memory; nothing touches
//! disk until the whole run has succeeded.

use anyhow::{bail, ensure, Result};
use serde_json::{json, Value};
use wavekin_core::census::{crossover_scan, crossover_time, write_census_csv, Budget};
use wavekin_core::diagrams::export::{couple_to_text, molecule_to_text};
use wavekin_core::diagrams::{
    build_molecule, enum_couples_of_order, is_regular, truncated_moment_by_order, DiagramConfig, COMBINATORIAL_CAP,
};
use wavekin_core::ensemble::{chaos_defect, run_ensemble, run_ensemble_tracked, write_moment_csv};
use wavekin_core::evolver::EvolveConfig;
use wavekin_core::fields::{sample_field_with, spectrum_on_modes, write_record, StreamKey};
use wavekin_core::kinetic::{
    first_iterate_integral, first_iterate_sum, solve_wke, write_trajectory_csv, DeltaBroadening, KineticGrid, WkeConfig,
};
use wavekin_core::lattice::{BoxSpec, ModeSet, WaveVector};

use crate::config::{field, required, wave_vector, Experiment, ExperimentConfig, KineticSection};

pub struct Artifacts {
    pub files: Vec<(String, Vec<u8>)>,
    pub summary: Value,
}

impl Artifacts {
    fn new(summary: Value) -> Self {
        Artifacts { files: Vec::new(), summary }
    }

    fn add(&mut self, name: &str, bytes: Vec<u8>) {
        self.files.push((name.to_string(), bytes));
    }
}

pub fn run(experiment: Experiment, cfg: &ExperimentConfig, seed: Option<u64>) -> Result<Artifacts> {
    if let Some(tag) = cfg.experiment {
        ensure!(tag == experiment, "config is for experiment `{}`, not `{}`", tag.tag(), experiment.tag());
    }
    match experiment {
        Experiment::Census => census(cfg),
        Experiment::FirstIterate => first_iterate(cfg),
        Experiment::Wke => wke(cfg),
        Experiment::Ensemble => ensemble(cfg, seed),
        Experiment::Compare => compare(cfg, seed),
        Experiment::Diagrams => diagrams(cfg),
        Experiment::Chaos => chaos(cfg, seed),
    }
}

fn axes(d: usize) -> Vec<String> {
    ["m_x", "m_y", "m_z"][..d].iter().map(|s| s.to_string()).collect()
}

fn csv_bytes(header: Vec<String>, rows: Vec<Vec<String>>) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(&header)?;
    for r in rows {
        w.write_record(&r)?;
    }
    Ok(w.into_inner().map_err(|e| e.into_error())?)
}

fn kinetic_grid(spec: &BoxSpec, k: &KineticSection) -> Result<(KineticGrid, DeltaBroadening)> {
    let grid = KineticGrid::for_spec(spec, k.h)?;
    let b = match k.width {
        Some(w) => DeltaBroadening { width: w, kernel: k.kernel },
        None => DeltaBroadening { kernel: k.kernel, ..grid.default_broadening() },
    };
    b.validate()?;
    Ok((grid, b))
}

fn ensemble_params(cfg: &ExperimentConfig, seed: Option<u64>) -> Result<(u64, u64)> {
    let e = required(&cfg.ensemble, "ensemble")?;
    ensure!(e.members >= 2, "ensemble.members = {} must be at least 2", e.members);
    Ok((e.members, seed.unwrap_or(e.seed)))
}

fn census(cfg: &ExperimentConfig) -> Result<Artifacts> {
    let c = required(&cfg.census, "census")?;
    let base = &cfg.box_spec;
    let k = match &c.k {
        Some(m) => wave_vector(m, base.d, "census.k")?,
        None => WaveVector::ZERO,
    };
    let betas = c.betas.clone().unwrap_or_else(|| vec![base.beta.clone()]);
    let ls = c.l_values.clone().unwrap_or_else(|| vec![base.l]);
    let mut rows = Vec::new();
    let mut crossovers = Vec::new();
    for beta in &betas {
        for &l in &ls {
            let spec = BoxSpec { beta: beta.clone(), l, ..base.clone() };
            spec.validate()?;
            let r = crossover_scan(std::slice::from_ref(&spec), k, &c.times, c.volume_samples, &Budget::default())?;
            crossovers.push(json!({
                "beta": spec.beta_label(),
                "L": l,
                "exact_count": r.first().map(|x| x.exact_count),
                "crossover_t": crossover_time(&r),
            }));
            rows.extend(r);
        }
    }
    let mut out = Artifacts::new(json!({ "boxes": crossovers }));
    let mut buf = Vec::new();
    write_census_csv(&rows, &mut buf)?;
    out.add("census.csv", buf);
    Ok(out)
}

fn first_iterate(cfg: &ExperimentConfig) -> Result<Artifacts> {
    let s = required(&cfg.first_iterate, "first_iterate")?;
    let f = required(&cfg.spectrum, "spectrum")?;
    let spec = &cfg.box_spec;
    let modes = match &s.modes {
        Some(ms) => ms.iter().map(|m| wave_vector(m, spec.d, "first_iterate.modes")).collect::<Result<Vec<_>>>()?,
        None => vec![WaveVector::ZERO],
    };
    let kinetic = match &cfg.kinetic {
        Some(k) => {
            let (grid, _) = kinetic_grid(spec, k)?;
            let n = grid.values_of(f)?;
            Some((grid, n))
        }
        None => None,
    };
    let eps = spec.epsilon();
    let mut header = vec!["t".to_string()];
    header.extend(axes(spec.d));
    header.extend(["lattice_sum".into(), "integral".into()]);
    let mut rows = Vec::new();
    for &t in &s.times {
        ensure!(t.is_finite() && t > 0.0, "first_iterate.times must be positive, got {t}");
        for &k in &modes {
            let sum = first_iterate_sum(spec, f, t, k)?;
            let integral = match &kinetic {
                Some((grid, n)) => {
                    let x = spec.wave_number(k);
                    let Some(node) = grid.node_at(&x[..spec.d]) else {
                        bail!("mode {k} is not a node of the kinetic mesh (h = {})", grid.h());
                    };
                    format!("{:e}", first_iterate_integral(grid, n, eps, t, node)?)
                }
                None => String::new(),
            };
            let mut r = vec![format!("{t}")];
            r.extend(k.components(spec.d).iter().map(|c| c.to_string()));
            r.extend([format!("{sum:e}"), integral]);
            rows.push(r);
        }
    }
    let mut out = Artifacts::new(json!({ "epsilon": eps, "t_kin": spec.t_kin() }));
    out.add("first_iterate.csv", csv_bytes(header, rows)?);
    Ok(out)
}

fn wke(cfg: &ExperimentConfig) -> Result<Artifacts> {
    let k = required(&cfg.kinetic, "kinetic")?;
    let f = required(&cfg.spectrum, "spectrum")?;
    let wc = WkeConfig::new(field(k.tau_end, "kinetic.tau_end")?, field(k.dtau, "kinetic.dtau")?)
        .with_snapshots(k.snapshot_times.clone());
    wc.validate()?;
    let (grid, b) = kinetic_grid(&cfg.box_spec, k)?;
    let n_in = grid.values_of(f)?;
    let traj = solve_wke(&grid, &n_in, &wc, &b)?;
    let mut out = Artifacts::new(json!({
        "nodes": grid.len(),
        "broadening": b,
        "clip_mass": traj.clip_mass,
        "clip_events": traj.clip_events,
        "stability_bound": traj.stability_bound,
        "dtau": traj.dtau,
    }));
    let mut buf = Vec::new();
    write_trajectory_csv(&grid, &traj, &mut buf)?;
    out.add("trajectory.csv", buf);
    Ok(out)
}

fn ensemble(cfg: &ExperimentConfig, seed: Option<u64>) -> Result<Artifacts> {
    let f = required(&cfg.spectrum, "spectrum")?;
    let ec = required(&cfg.evolve, "evolve")?;
    ec.validate()?;
    let (m, seed) = ensemble_params(cfg, seed)?;
    let spec = &cfg.box_spec;
    let modes = ModeSet::build(spec)?;
    let law = cfg.noise.law;
    let tables = run_ensemble(spec, f, law, ec, m, seed)?;
    let mut out = Artifacts::new(json!({ "members": m, "seed": seed, "modes": modes.len(), "snapshots": tables.len() }));
    let mut buf = Vec::new();
    write_moment_csv(&tables, &modes, &mut buf)?;
    out.add("moments.csv", buf);
    if cfg.ensemble.as_ref().is_some_and(|e| e.dump_initial_field) {
        let n_in = spectrum_on_modes(spec, &modes, f)?;
        let mut rec = Vec::new();
        write_record(&sample_field_with(spec, &n_in, law, StreamKey::new(seed, 0)), &mut rec)?;
        out.add("member0_initial.bin", rec);
    }
    Ok(out)
}

fn compare(cfg: &ExperimentConfig, seed: Option<u64>) -> Result<Artifacts> {
    let c = required(&cfg.compare, "compare")?;
    let k = required(&cfg.kinetic, "kinetic")?;
    let f = required(&cfg.spectrum, "spectrum")?;
    let (m, seed) = ensemble_params(cfg, seed)?;
    ensure!(c.tau.is_finite() && c.tau > 0.0, "compare.tau must be positive");
    ensure!(!c.l_values.is_empty(), "compare.l_values is empty");
    let base = &cfg.box_spec;
    let specs = c.l_values.iter().map(|&l| base.with_l(l)).collect::<wavekin_core::Result<Vec<_>>>()?;
    let (grid, b) = kinetic_grid(base, k)?;
    let n_in = grid.values_of(f)?;
    // With the nonlinearity off the kinetic solution is stationary.
    let n_tau = if base.linear {
        n_in.clone()
    } else {
        let wc = WkeConfig::new(c.tau, c.dtau.unwrap_or(c.tau / 10.0));
        solve_wke(&grid, &n_in, &wc.with_snapshots(vec![c.tau]), &b)?.states.pop().expect("final state").values
    };
    let peak = n_in.iter().cloned().fold(0.0, f64::max);
    let d = base.d;
    let mut header = vec!["L".to_string()];
    header.extend(axes(d));
    header.extend(["mc_mean", "mc_stderr", "wke", "defect", "z"].iter().map(|s| s.to_string()));
    let mut rows = Vec::new();
    let mut per_l = Vec::new();
    let mut max_z: f64 = 0.0;
    for spec in &specs {
        let modes = ModeSet::build(spec)?;
        let t = c.tau * spec.t_kin();
        let ec = EvolveConfig::new(c.dt, t).with_snapshots(vec![t]);
        let table = run_ensemble(spec, f, cfg.noise.law, &ec, m, seed)?.pop().expect("final table");
        let (mut sup, mut sigma, mut peak_defect, mut common) = (0.0f64, 0.0, f64::NAN, 0usize);
        for (i, &mode) in modes.modes().iter().enumerate() {
            let x = spec.wave_number(mode);
            let Some(node) = grid.node_at(&x[..d]) else { continue };
            common += 1;
            let defect = table.mean[i] - n_tau[node];
            let z = if table.stderr[i] > 0.0 { defect.abs() / table.stderr[i] } else { 0.0 };
            max_z = max_z.max(z);
            if defect.abs() / peak > sup {
                sup = defect.abs() / peak;
                sigma = table.stderr[i] / peak;
            }
            if mode == WaveVector::ZERO {
                peak_defect = defect.abs() / n_tau[node];
            }
            let mut r = vec![format!("{}", spec.l)];
            r.extend(mode.components(d).iter().map(|c| c.to_string()));
            r.extend([table.mean[i], table.stderr[i], n_tau[node], defect, z].iter().map(|v| format!("{v:e}")));
            rows.push(r);
        }
        ensure!(common > 0, "no lattice mode at L = {} lies on the kinetic mesh", spec.l);
        per_l.push(json!({ "L": spec.l, "t": t, "common_modes": common, "peak_defect": peak_defect, "sup_defect": sup, "sup_sigma": sigma }));
    }
    let pass = max_z <= 4.0;
    let mut out = Artifacts::new(json!({
        "members": m, "seed": seed, "tau": c.tau, "linear": base.linear,
        "ladder": per_l, "max_z": max_z, "within_4_sigma": if pass { "PASS" } else { "FAIL" },
    }));
    out.add("compare.csv", csv_bytes(header, rows)?);
    Ok(out)
}

fn diagrams(cfg: &ExperimentConfig) -> Result<Artifacts> {
    let s = required(&cfg.diagrams, "diagrams")?;
    ensure!(s.max_order <= COMBINATORIAL_CAP, "diagrams.max_order = {} exceeds the cap {COMBINATORIAL_CAP}", s.max_order);
    let mut couples_txt = String::new();
    let mut molecules_txt = String::new();
    let mut census = Vec::new();
    for n in 0..=s.max_order {
        let all = enum_couples_of_order(n)?;
        let mut regular = 0usize;
        for (j, c) in all.iter().enumerate() {
            let reg = is_regular(c);
            regular += usize::from(reg);
            couples_txt.push_str(&format!("# order {n} index {j} regular {reg}\n{}\n", couple_to_text(c)));
            molecules_txt.push_str(&format!("# order {n} index {j}\n{}\n", molecule_to_text(&build_molecule(c))));
        }
        census.push(vec![n.to_string(), all.len().to_string(), regular.to_string()]);
    }
    let mut out = Artifacts::new(json!({ "max_order": s.max_order }));
    out.add("couple_census.csv", csv_bytes(vec!["order".into(), "couples".into(), "regular".into()], census)?);
    out.add("couples.txt", couples_txt.into_bytes());
    out.add("molecules.txt", molecules_txt.into_bytes());
    if let Some(tau) = s.tau {
        let f = required(&cfg.spectrum, "spectrum")?;
        let spec = &cfg.box_spec;
        let modes = ModeSet::build(spec)?;
        let n_in = spectrum_on_modes(spec, &modes, f)?;
        let dc = DiagramConfig { delta: s.delta, ..DiagramConfig::default() };
        let by_order = truncated_moment_by_order(spec, &n_in, tau, s.moment_order, &dc)?;
        let mut header = axes(spec.d);
        header.push("n_in".into());
        header.extend((0..by_order.len()).map(|o| format!("order_{o}")));
        header.push("total".into());
        let rows = modes
            .modes()
            .iter()
            .enumerate()
            .map(|(i, k)| {
                let mut r: Vec<String> = k.components(spec.d).iter().map(|c| c.to_string()).collect();
                r.push(format!("{:e}", n_in[i]));
                r.extend(by_order.iter().map(|o| format!("{:e}", o[i])));
                r.push(format!("{:e}", by_order.iter().map(|o| o[i]).sum::<f64>()));
                r
            })
            .collect();
        out.add("truncated_moment.csv", csv_bytes(header, rows)?);
        out.summary["t"] = json!(tau * dc.lambda(spec));
    }
    Ok(out)
}

fn chaos(cfg: &ExperimentConfig, seed: Option<u64>) -> Result<Artifacts> {
    let c = required(&cfg.chaos, "chaos")?;
    let f = required(&cfg.spectrum, "spectrum")?;
    let ec = required(&cfg.evolve, "evolve")?;
    ec.validate()?;
    let (m, seed) = ensemble_params(cfg, seed)?;
    let spec = &cfg.box_spec;
    let track = c.modes.iter().map(|k| wave_vector(k, spec.d, "chaos.modes")).collect::<Result<Vec<_>>>()?;
    let modes = ModeSet::build(spec)?;
    if let Some(k) = track.iter().find(|k| !modes.contains(**k)) {
        bail!("chaos mode {k} lies outside the cutoff ball");
    }
    let out_ens = run_ensemble_tracked(spec, f, cfg.noise.law, ec, m, seed, &track)?;
    let join = |v: &[u32]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(";");
    let mut rows = Vec::new();
    for s in &out_ens.samples {
        let cd = chaos_defect(s, &track)?;
        rows.push(vec![
            format!("{}", s.t),
            format!("{:e}", cd.defect),
            format!("{:e}", cd.stderr),
            format!("{:e}", cd.max_z),
            join(&cd.pattern.0),
            join(&cd.pattern.1),
        ]);
    }
    let header = ["t", "defect", "stderr", "max_z", "p", "q"].iter().map(|s| s.to_string()).collect();
    let mut out = Artifacts::new(json!({ "members": m, "seed": seed, "modes": track }));
    out.add("chaos.csv", csv_bytes(header, rows)?);
    Ok(out)
}
