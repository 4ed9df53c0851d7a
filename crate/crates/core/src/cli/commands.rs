use rayon::prelude::*;
use serde_json::{json, Value};

use crate::cmft::{phase_scan, Branch, ClusterProblem, CmftResult, PhasePoint};
use crate::hamiltonian::{ClusterGeometry, ModelParams};
use crate::observables::{
    correlation, fidelity_scan, interior_maxima, jumps, pair_binding_energy, refined_peak,
    single_cavity_spectrum, solve_chain, staircase, CorrelationKind, EnergyTable,
};
use crate::JchError;

use super::config::{Geometry, RunConfig};
use super::table::{Cell, Table};
use super::CliError;

/// Tabular results plus anything that does not fit one row per record.
pub struct Output {
    pub table: Table,
    pub summary: Value,
}

pub fn single_cavity(cfg: &RunConfig) -> Result<Output, CliError> {
    let mut table = Table::new(["beta12", "delta", "mu", "n", "energy", "shifted"]);
    let mut binding = Vec::new();
    for beta12 in cfg.beta12.as_ref().map(|g| g.values()).unwrap_or_default() {
        let params = ModelParams { beta12, ..cfg.model };
        for mu in cfg.mus() {
            for n in 1..=cfg.polaritons {
                let s = single_cavity_spectrum(n, &params, mu)?;
                table.push(vec![
                    beta12.into(),
                    params.delta.into(),
                    mu.into(),
                    n.into(),
                    s.lowest().into(),
                    s.lowest_shifted().into(),
                ]);
            }
        }
        binding.push(json!({ "beta12": beta12, "pair_binding": pair_binding_energy(&params)? }));
    }
    Ok(Output {
        table,
        summary: json!({ "pair_binding": binding }),
    })
}

pub fn rho_mu(cfg: &RunConfig) -> Result<Output, CliError> {
    if cfg.geometry == Geometry::Cluster {
        return cluster_scan(cfg, false);
    }
    let [lo, hi] = cfg.charges.expect("resolved");
    let table = EnergyTable::compute(cfg.sites, lo..=hi, &cfg.model, cfg.boundary, &cfg.solve_options())?;
    let stair = staircase(&table, &cfg.mus())?;
    let mut out = Table::new(["mu", "n", "rho"]);
    for &(mu, n) in &stair.samples {
        out.push(vec![mu.into(), n.into(), (n as f64 / cfg.sites as f64).into()]);
    }
    let energies: Vec<Value> = table.iter().map(|(n, e)| json!({ "n": n, "energy": e })).collect();
    let jumps: Vec<Value> = jumps(&table)
        .iter()
        .map(|j| json!({ "mu": j.mu, "from": j.from, "to": j.to }))
        .collect();
    let steps: Vec<Value> = stair
        .steps
        .iter()
        .map(|s| json!({ "mu_from": s.mu_from, "mu_to": s.mu_to, "n": s.n, "rho": s.rho, "delta_n": s.delta_n }))
        .collect();
    Ok(Output {
        table: out,
        summary: json!({ "energies": energies, "jumps": jumps, "steps": steps }),
    })
}

pub fn correlations(cfg: &RunConfig) -> Result<Output, CliError> {
    let charge = cfg.charge.expect("resolved");
    let i0 = cfg.reference.expect("resolved");
    let dmax = cfg.max_distance.expect("resolved");
    let mut columns = vec!["kappa".to_owned(), "reference".into(), "distance".into()];
    columns.extend(CorrelationKind::ALL.iter().map(|k| k.name().to_owned()));
    let mut table = Table::new(columns);
    let mut states = Vec::new();
    let opts = cfg.solve_options();
    for kappa in cfg.kappas() {
        let (basis, gs) = solve_chain(cfg.sites, charge, &cfg.model.with_kappa(kappa), cfg.boundary, &opts)?;
        let gs = gs.into_result()?;
        for d in 0..=dmax {
            let mut row: Vec<Cell> = vec![kappa.into(), i0.into(), d.into()];
            for kind in CorrelationKind::ALL {
                row.push(correlation(&gs.vector, &basis, kind, i0, i0 + d)?.into());
            }
            table.push(row);
        }
        states.push(json!({ "kappa": kappa, "energy": gs.energy, "residual": gs.residual }));
    }
    Ok(Output {
        table,
        summary: json!({ "rho": charge as f64 / cfg.sites as f64, "ground_states": states }),
    })
}

pub fn fidelity(cfg: &RunConfig) -> Result<Output, CliError> {
    let charge = cfg.charge.expect("resolved");
    let kappas = cfg.kappas();
    let pts = fidelity_scan(cfg.sites, charge, &cfg.model, cfg.boundary, &kappas, cfg.dk, &cfg.solve_options())?;
    let chi: Vec<f64> = pts.iter().map(|p| p.chi).collect();
    let half: Vec<f64> = pts.iter().map(|p| p.chi_half).collect();
    let peak = chi
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .map(|(k, _)| k);
    let mut table = Table::new(["kappa", "chi", "chi_half", "max"]);
    for (k, p) in pts.iter().enumerate() {
        table.push(vec![p.kappa.into(), p.chi.into(), p.chi_half.into(), (Some(k) == peak).into()]);
    }
    let interior: Vec<f64> = interior_maxima(&chi).into_iter().map(|k| kappas[k]).collect();
    let interior_half: Vec<f64> = interior_maxima(&half).into_iter().map(|k| kappas[k]).collect();
    Ok(Output {
        table,
        summary: json!({
            "rho": charge as f64 / cfg.sites as f64,
            "peak": peak.map(|k| kappas[k]),
            "refined_peak": refined_peak(&kappas, &chi),
            "refined_peak_half": refined_peak(&kappas, &half),
            "interior_maxima": interior,
            "interior_maxima_half": interior_half,
        }),
    })
}

pub fn cmft_scan(cfg: &RunConfig) -> Result<Output, CliError> {
    cluster_scan(cfg, true)
}

fn cluster_scan(cfg: &RunConfig, detailed: bool) -> Result<Output, CliError> {
    let geom = ClusterGeometry::new(cfg.cluster);
    let sites = geom.sites();
    let mut columns: Vec<String> = ["kappa", "mu", "rho", "mean_psi"].map(String::from).to_vec();
    if detailed {
        columns.extend((0..sites).map(|i| format!("psi_{i}")));
    }
    columns.extend(["energy", "branch", "iterations", "converged", "residual"].map(String::from));
    if detailed {
        columns.extend(CorrelationKind::ALL.iter().map(|k| k.name().to_owned()));
    }
    let mut table = Table::new(columns);
    let mut zero_jumps = Vec::new();
    let cmft = cfg.cmft_config();
    let mus = cfg.mus();
    for kappa in cfg.kappas() {
        let problem = ClusterProblem::new(geom.clone(), &cfg.model.with_kappa(kappa), &cmft)?;
        let results = mus
            .par_iter()
            .map(|&mu| problem.solve(mu))
            .collect::<Result<Vec<CmftResult>, JchError>>()?;
        for (&mu, r) in mus.iter().zip(&results) {
            let mut row: Vec<Cell> = vec![kappa.into(), mu.into(), r.rho.into(), r.mean_psi().into()];
            if detailed {
                row.extend(r.psi.iter().map(|&p| Cell::from(p)));
            }
            row.extend([
                r.energy.into(),
                branch_name(r.branch).into(),
                r.iterations.into(),
                r.converged.into(),
                r.residual.into(),
            ]);
            if detailed {
                for kind in CorrelationKind::ALL {
                    let v = r.cluster_correlations.iter().find(|(k, _)| *k == kind).map(|(_, v)| *v);
                    row.push(v.into());
                }
            }
            table.push(row);
        }
        let j: Vec<Value> = problem
            .zero_branch_jumps()
            .iter()
            .map(|j| json!({ "mu": j.mu, "from": j.from, "to": j.to }))
            .collect();
        zero_jumps.push(json!({ "kappa": kappa, "jumps": j }));
    }
    Ok(Output {
        table,
        summary: json!({ "cluster": cfg.cluster.to_string(), "zero_branch_jumps": zero_jumps }),
    })
}

fn branch_name(b: Branch) -> &'static str {
    match b {
        Branch::Zero => "zero",
        Branch::Seeded => "seeded",
    }
}

pub fn phase_diagram(cfg: &RunConfig) -> Result<Output, CliError> {
    let geom = ClusterGeometry::new(cfg.cluster);
    let kappas = cfg.kappas();
    let mus = cfg.mus();
    let pts = phase_scan(&geom, &cfg.model, &kappas, &mus, &cfg.cmft_config(), &cfg.thresholds)?;
    let label = |p: &PhasePoint| p.label.map_or("unconverged".to_owned(), |l| l.to_string());
    let mut table = Table::new([
        "kappa", "mu", "label", "mean_psi", "rho", "pair_ratio", "step", "branch", "converged",
    ]);
    for p in &pts {
        table.push(vec![
            p.kappa.into(),
            p.mu.into(),
            label(p).into(),
            p.mean_psi.into(),
            p.rho.into(),
            p.pair_ratio.into(),
            p.step.into(),
            branch_name(p.branch).into(),
            p.converged.into(),
        ]);
    }
    let mut boundaries = Vec::new();
    for column in pts.chunks(mus.len()) {
        for w in column.windows(2) {
            if w[0].label != w[1].label {
                boundaries.push(json!({
                    "kappa": w[0].kappa,
                    "mu_below": w[0].mu,
                    "mu_above": w[1].mu,
                    "from": label(&w[0]),
                    "to": label(&w[1]),
                }));
            }
        }
    }
    Ok(Output {
        table,
        summary: json!({ "cluster": cfg.cluster.to_string(), "boundaries": boundaries }),
    })
}
