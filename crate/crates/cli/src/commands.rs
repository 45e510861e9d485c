//! Subcommand bodies. Each returns the files to write and a short summary.

use serde::Serialize;
use superrep_core::choi::ProcessMatrix;
use superrep_core::gates::{
    baseline_measure_prepare, baseline_single_copy, fidelity_replicas, optimal_cloner_fidelity,
    twirled_fidelity, PhaseAngle,
};
use superrep_core::optics::{
    experiment_fidelities, imperfection_scan, toffoli_fidelity, OpticsParams, ScanParameter,
};
use superrep_core::qmat::Tolerances;
use superrep_core::superrep::{build_v_permutation, fidelity_sweep, replicas_for, ReplicationSpec};
use superrep_core::tomo::{experiment_pipeline, FitResult, MleOptions, PipelineConfig};

use crate::config::{default_scan_values, RunConfig};
use crate::output::{csv_text, fmt_f64, json_text, Metadata, Outputs};
use crate::svg::{heat_maps, LinePlot, Series};
use crate::CliError;

pub struct RunResult {
    pub outputs: Outputs,
    pub summary: Vec<String>,
}

fn core_err(e: superrep_core::Error) -> CliError {
    CliError::Runtime(e.to_string())
}

pub const REPLICATE_COLUMNS: [&str; 8] = [
    "phi",
    "f_uu_ideal",
    "f_uu_noisy",
    "f_cu_noisy",
    "f_single_copy",
    "f_measure_prepare",
    "f_twirled",
    "f_optimal_cloner",
];

pub fn replicate(config: &RunConfig) -> Result<RunResult, CliError> {
    let meta = Metadata::new("replicate", config);
    let params = config.optics.params();
    let measure_prepare = baseline_measure_prepare();
    let mut table: Vec<[f64; 8]> = Vec::new();
    for phi in config.phases.angles() {
        let noisy = experiment_fidelities(phi, &params).map_err(core_err)?;
        table.push([
            phi.radians(),
            fidelity_replicas(phi),
            noisy.replicas,
            noisy.controlled,
            baseline_single_copy(phi),
            measure_prepare,
            twirled_fidelity(phi, config.replicate.twirl_grid).map_err(core_err)?,
            optimal_cloner_fidelity(phi),
        ]);
    }
    let rows: Vec<Vec<String>> = table
        .iter()
        .map(|r| r.iter().map(|&x| fmt_f64(x)).collect())
        .collect();
    let mut outputs = Outputs::default();
    outputs.add("replicate.csv", csv_text(&meta, &REPLICATE_COLUMNS, &rows));
    if config.svg {
        let series = (1..8)
            .map(|c| Series {
                label: REPLICATE_COLUMNS[c],
                points: table.iter().map(|r| (r[0], r[c])).collect(),
                markers: c == 2 || c == 3,
            })
            .collect();
        let plot = LinePlot {
            title: "Replication fidelities",
            x_label: "phase φ (rad)",
            y_label: "fidelity",
            series,
            log_y: false,
        };
        outputs.add("replicate.svg", plot.render(&meta.svg_comment()));
    }
    let n = table.len() as f64;
    let summary = vec![
        format!("{} phases", table.len()),
        format!("mean F_UU ideal {:.6}", table.iter().map(|r| r[1]).sum::<f64>() / n),
        format!("mean F_UU simulated {:.6}", table.iter().map(|r| r[2]).sum::<f64>() / n),
        format!("mean F_CU simulated {:.6}", table.iter().map(|r| r[3]).sum::<f64>() / n),
    ];
    Ok(RunResult { outputs, summary })
}

pub const SUPERREP_COLUMNS: [&str; 5] = ["N", "M", "alpha", "worst_phi", "worst_fidelity"];

#[derive(Serialize)]
struct PermutationCheck {
    copies: usize,
    replicas: usize,
    involution: bool,
}

pub fn superrep(config: &RunConfig) -> Result<RunResult, CliError> {
    let meta = Metadata::new("superrep", config);
    let section = &config.superrep;
    let specs: Vec<ReplicationSpec> = match &section.pairs {
        Some(pairs) => pairs
            .iter()
            .map(|p| ReplicationSpec::new(p[0], p[1]))
            .collect::<Result<_, _>>(),
        None => section
            .copies
            .iter()
            .map(|&n| ReplicationSpec::new(n, replicas_for(n, section.alpha)))
            .collect::<Result<_, _>>(),
    }
    .map_err(|e| CliError::Validation(e.to_string()))?;
    let phases = PhaseAngle::uniform_grid(section.phase_points);
    let rows = fidelity_sweep(&specs, section.alpha, &phases).map_err(core_err)?;

    let tol = Tolerances {
        max_qubits: config.max_qubits,
        ..Tolerances::default()
    };
    let mut checks = Vec::new();
    for spec in specs.iter().filter(|s| s.total_qubits() <= config.max_qubits) {
        let perm = build_v_permutation(spec, &tol).map_err(core_err)?;
        checks.push(PermutationCheck {
            copies: spec.copies(),
            replicas: spec.replicas(),
            involution: (0..perm.len()).all(|j| perm[perm[j]] == j),
        });
    }

    let csv_rows: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                r.copies.to_string(),
                r.replicas.to_string(),
                fmt_f64(r.alpha),
                fmt_f64(r.worst_phi),
                fmt_f64(r.worst_fidelity),
            ]
        })
        .collect();
    let mut outputs = Outputs::default();
    outputs.add("superrep.csv", csv_text(&meta, &SUPERREP_COLUMNS, &csv_rows));
    outputs.add(
        "superrep_checks.json",
        json_text(&meta, &serde_json::json!({ "permutation_checks": checks }))?,
    );
    if config.svg {
        let plot = LinePlot {
            title: "Worst-case infidelity",
            x_label: "copies N",
            y_label: "1 − min F",
            series: vec![Series {
                label: "closed form",
                points: rows
                    .iter()
                    .map(|r| (r.copies as f64, r.worst_infidelity()))
                    .collect(),
                markers: true,
            }],
            log_y: true,
        };
        outputs.add("superrep.svg", plot.render(&meta.svg_comment()));
    }
    let mut summary: Vec<String> = rows
        .iter()
        .map(|r| {
            format!(
                "N={} M={} worst F={:.6e} at φ={:.4}",
                r.copies, r.replicas, r.worst_fidelity, r.worst_phi
            )
        })
        .collect();
    summary.push(format!(
        "imprinting permutation checked for {} of {} rows",
        checks.len(),
        rows.len()
    ));
    Ok(RunResult { outputs, summary })
}

pub const TOMO_COLUMNS: [&str; 9] = [
    "phase_id",
    "phi",
    "f_cu",
    "f_uu",
    "f_cu_std",
    "f_uu_std",
    "model_f_cu",
    "model_f_uu",
    "mle_converged",
];

#[derive(Serialize)]
struct TomoPhase {
    phase_id: usize,
    phi: f64,
    f_cu: f64,
    f_uu: f64,
    f_cu_std: Option<f64>,
    f_uu_std: Option<f64>,
    model_f_cu: f64,
    model_f_uu: f64,
    mle_converged: bool,
}

#[derive(Serialize)]
struct TomoReport {
    params: OpticsParams,
    rate: f64,
    trials: usize,
    mean_f_cu: f64,
    mean_f_uu: f64,
    fit: FitResult,
    phases: Vec<TomoPhase>,
}

fn parts(chi: &ProcessMatrix) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let rec = chi.to_record();
    (rec.real, rec.imag)
}

pub fn tomo(config: &RunConfig) -> Result<RunResult, CliError> {
    let meta = Metadata::new("tomo", config);
    let params = config.optics.params();
    let pipeline = PipelineConfig {
        phases: config.phases.angles(),
        rate: config.tomo.rate,
        trials: config.tomo.trials,
        seed: config.seed,
        mle: MleOptions {
            max_iterations: config.tomo.max_iterations,
            tolerance: config.tomo.tolerance,
            initial: None,
        },
    };
    let report = experiment_pipeline(&params, &pipeline).map_err(core_err)?;

    let mut outputs = Outputs::default();
    let mut phases = Vec::new();
    let mut rows = Vec::new();
    for p in &report.phases {
        let std = p.error_bars.map(|s| (s.controlled.std_dev, s.replicas.std_dev));
        rows.push(vec![
            p.phase_id.to_string(),
            fmt_f64(p.phi),
            fmt_f64(p.controlled),
            fmt_f64(p.replicas),
            std.map(|s| fmt_f64(s.0)).unwrap_or_default(),
            std.map(|s| fmt_f64(s.1)).unwrap_or_default(),
            fmt_f64(p.model_controlled),
            fmt_f64(p.model_replicas),
            p.mle_converged.to_string(),
        ]);
        phases.push(TomoPhase {
            phase_id: p.phase_id,
            phi: p.phi,
            f_cu: p.controlled,
            f_uu: p.replicas,
            f_cu_std: std.map(|s| s.0),
            f_uu_std: std.map(|s| s.1),
            model_f_cu: p.model_controlled,
            model_f_uu: p.model_replicas,
            mle_converged: p.mle_converged,
        });
        outputs.add(
            format!("tomo_chi/phase_{}.json", p.phase_id),
            json_text(&meta, &serde_json::json!({ "process_matrix": p.chi.to_record() }))?,
        );
        outputs.add(
            format!("tomo_chi/phase_{}_ideal.json", p.phase_id),
            json_text(&meta, &serde_json::json!({ "process_matrix": p.chi_ideal.to_record() }))?,
        );
        if config.svg {
            let (re, im) = parts(&p.chi);
            let (re_th, im_th) = parts(&p.chi_ideal);
            let title = format!("Process matrix, φ = {:.4}", p.phi);
            outputs.add(
                format!("tomo_chi/phase_{}.svg", p.phase_id),
                heat_maps(
                    &title,
                    &[("Re χ", re), ("Im χ", im), ("Re χ_th", re_th), ("Im χ_th", im_th)],
                    &meta.svg_comment(),
                ),
            );
        }
    }
    outputs.add("tomo_fidelities.csv", csv_text(&meta, &TOMO_COLUMNS, &rows));

    let mut dataset_csv = meta.csv_header().into_bytes();
    report
        .dataset
        .write_csv(&mut dataset_csv)
        .map_err(|e| CliError::Runtime(e.to_string()))?;
    outputs.add("tomo_dataset.csv", dataset_csv);

    let body = TomoReport {
        params,
        rate: config.tomo.rate,
        trials: config.tomo.trials,
        mean_f_cu: report.mean_controlled,
        mean_f_uu: report.mean_replicas,
        fit: report.fit,
        phases,
    };
    outputs.add("tomo_report.json", json_text(&meta, &body)?);

    if config.svg {
        let fit = report.fit;
        let curve: Vec<(f64, f64)> = (0..=100)
            .map(|i| {
                let x = std::f64::consts::TAU * i as f64 / 100.0;
                (x, fit.a + fit.b * x.cos())
            })
            .collect();
        let ideal: Vec<(f64, f64)> = curve
            .iter()
            .map(|&(x, _)| (x, (5.0 + 3.0 * x.cos()) / 8.0))
            .collect();
        let plot = LinePlot {
            title: "Reconstructed fidelities",
            x_label: "phase φ (rad)",
            y_label: "fidelity",
            series: vec![
                Series {
                    label: "F_CU",
                    points: report.phases.iter().map(|p| (p.phi, p.controlled)).collect(),
                    markers: true,
                },
                Series {
                    label: "F_UU",
                    points: report.phases.iter().map(|p| (p.phi, p.replicas)).collect(),
                    markers: true,
                },
                Series {
                    label: "A + B cos φ",
                    points: curve,
                    markers: false,
                },
                Series {
                    label: "(5 + 3 cos φ)/8",
                    points: ideal,
                    markers: false,
                },
            ],
            log_y: false,
        };
        outputs.add("tomo_fidelities.svg", plot.render(&meta.svg_comment()));
    }

    let summary = vec![
        format!("{} phases at rate {}", report.phases.len(), config.tomo.rate),
        format!("mean F_CU {:.6}", report.mean_controlled),
        format!("mean F_UU {:.6}", report.mean_replicas),
        format!("fit A {:.6} B {:.6}", report.fit.a, report.fit.b),
    ];
    Ok(RunResult { outputs, summary })
}

pub const SCAN_COLUMNS: [&str; 5] = [
    "parameter",
    "value",
    "toffoli_fidelity",
    "mean_f_cu",
    "mean_f_uu",
];

pub fn optics_scan(config: &RunConfig) -> Result<RunResult, CliError> {
    let meta = Metadata::new("optics-scan", config);
    let base = config.optics.params();
    let phases = config.phases.angles();
    let parameters: Vec<ScanParameter> = match config.scan.parameter {
        Some(p) => vec![p],
        None => ScanParameter::ALL.to_vec(),
    };
    let mut outputs = Outputs::default();
    let mut rows = Vec::new();
    let mut summary = Vec::new();
    for parameter in parameters {
        let values = config
            .scan
            .values
            .clone()
            .unwrap_or_else(|| default_scan_values(parameter));
        for &v in &values {
            parameter
                .apply(&base, v)
                .validate()
                .map_err(|e| CliError::Validation(format!("scan value: {e}")))?;
        }
        let points = imperfection_scan(parameter, &base, &values, &phases).map_err(core_err)?;
        for p in &points {
            rows.push(vec![
                parameter.name().to_string(),
                fmt_f64(p.value),
                fmt_f64(p.toffoli_fidelity),
                fmt_f64(p.mean_controlled),
                fmt_f64(p.mean_replicas),
            ]);
        }
        let best = points
            .iter()
            .max_by(|a, b| a.toffoli_fidelity.total_cmp(&b.toffoli_fidelity))
            .expect("non-empty scan");
        summary.push(format!(
            "{}: {} points, best F_T {:.6} at {}",
            parameter.name(),
            points.len(),
            best.toffoli_fidelity,
            best.value
        ));
        if config.svg {
            let plot = LinePlot {
                title: "Imperfection scan",
                x_label: parameter.name(),
                y_label: "fidelity",
                series: vec![
                    Series {
                        label: "F_T",
                        points: points.iter().map(|p| (p.value, p.toffoli_fidelity)).collect(),
                        markers: false,
                    },
                    Series {
                        label: "mean F_CU",
                        points: points.iter().map(|p| (p.value, p.mean_controlled)).collect(),
                        markers: false,
                    },
                    Series {
                        label: "mean F_UU",
                        points: points.iter().map(|p| (p.value, p.mean_replicas)).collect(),
                        markers: false,
                    },
                ],
                log_y: false,
            };
            outputs.add(
                format!("optics_scan_{}.svg", parameter.name()),
                plot.render(&meta.svg_comment()),
            );
        }
    }
    outputs.add("optics_scan.csv", csv_text(&meta, &SCAN_COLUMNS, &rows));
    let design_point = toffoli_fidelity(&base).map_err(core_err)?;
    summary.push(format!("F_T at base parameters {design_point:.6}"));
    Ok(RunResult { outputs, summary })
}
