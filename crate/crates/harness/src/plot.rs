//! Plot-ready text files, one per figure panel. No rendering.
//!
//! Every file is comma-separated with the header
//! `series,<x>[,<x2>],<value>,stderr,n`; empty fields mean "not applicable".

use std::path::{Path, PathBuf};

use crate::error::{HarnessError, HarnessResult};
use crate::table::ResultTable;

/// Column names of one panel.
#[derive(Debug, Clone, Copy)]
pub struct PanelSpec {
    pub panel: &'static str,
    pub x: &'static str,
    pub x2: Option<&'static str>,
    pub value: &'static str,
}

#[derive(Debug, Clone, Copy)]
pub struct Figure {
    pub id: &'static str,
    pub experiment: &'static str,
    pub description: &'static str,
    pub panels: &'static [PanelSpec],
}

const fn panel(panel: &'static str, x: &'static str, value: &'static str) -> PanelSpec {
    PanelSpec { panel, x, x2: None, value }
}

pub const FIGURES: &[Figure] = &[
    Figure {
        id: "parity",
        experiment: "parity-sweep",
        description: "shifted and static populations vs move distance",
        panels: &[panel("populations", "delta_x_nm", "p_excited"), panel("fit", "delta_x_nm", "p_fit")],
    },
    Figure {
        id: "pattern",
        experiment: "phase-pattern",
        description: "per-site Ramsey fringes and fitted site phases",
        panels: &[panel("populations", "dark_time_us", "p_excited"), panel("site_phase", "site", "phase_rad")],
    },
    Figure {
        id: "tomography",
        experiment: "cardinal-tomography",
        description: "cardinal-state fidelities and reconstructed Bloch vectors",
        panels: &[
            panel("fidelity", "state_index", "fidelity"),
            panel("bloch", "component", "bloch"),
            panel("populations", "basis_index", "p_excited"),
            panel("global_pulse", "angle_rad", "p_excited"),
            panel("shift", "delta_x_nm", "p_excited"),
        ],
    },
    Figure {
        id: "fringes",
        experiment: "dual-quadrature",
        description: "mean quadrature populations, fitted fringes and mean phase",
        panels: &[
            panel("mean_populations", "t", "p_excited"),
            panel("mean_fit", "t", "p_fit"),
            panel("mean_phase", "t", "theta_rad"),
        ],
    },
    Figure {
        id: "deviations",
        experiment: "dual-quadrature",
        description: "per-time deviation histograms with bin edges and spread growth",
        panels: &[
            PanelSpec { panel: "histogram", x: "bin_lo_rad", x2: Some("bin_hi_rad"), value: "density" },
            panel("sigma", "t", "sigma_rad"),
        ],
    },
    Figure {
        id: "slip",
        experiment: "dual-quadrature",
        description: "laser-phase slip probability vs time for both dynamic ranges",
        panels: &[panel("epsilon", "t", "slip_probability")],
    },
    Figure {
        id: "tmax",
        experiment: "dual-quadrature",
        description: "maximum interrogation time vs slip probability for both dynamic ranges",
        panels: &[panel("tmax", "epsilon", "t_max")],
    },
    Figure {
        id: "dd",
        experiment: "local-dd",
        description: "decoupled ensemble fringes, phases and frequency ratios",
        panels: &[
            panel("populations", "total_time_us", "p_excited"),
            panel("phase", "total_time_us", "phase_rad"),
            panel("frequency_ratio", "ensemble", "ratio"),
        ],
    },
    Figure {
        id: "kernel",
        experiment: "kernel-schedule",
        description: "per-ensemble phase vs kernel length with the segment-sum reference",
        panels: &[panel("phase", "kernel_length_us", "phase_rad")],
    },
    Figure {
        id: "multi-slip",
        experiment: "multi-ensemble-slip",
        description: "cascaded slip probability vs full-phase spread per ensemble count",
        panels: &[panel("slip", "sigma_full_rad", "slip_probability")],
    },
];

pub fn figure(id: &str) -> Option<&'static Figure> {
    FIGURES.iter().find(|f| f.id == id)
}

fn fmt_opt<T: ToString>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Writes `<out_dir>/<figure_id>_<panel>.csv` for every panel that has rows
/// and returns the paths written.
pub fn emit_plot_data(table: &ResultTable, figure_id: &str, out_dir: &Path) -> HarnessResult<Vec<PathBuf>> {
    let fig = figure(figure_id).ok_or_else(|| {
        let known: Vec<&str> = FIGURES.iter().map(|f| f.id).collect();
        HarnessError::Validation(vec![format!("unknown figure `{figure_id}`; known: {}", known.join(", "))])
    })?;
    if !table.rows.iter().any(|r| r.experiment == fig.experiment) {
        return Err(HarnessError::Validation(vec![format!(
            "table has no `{}` rows for figure `{figure_id}`",
            fig.experiment
        )]));
    }
    std::fs::create_dir_all(out_dir).map_err(|e| HarnessError::io(out_dir, e))?;
    let mut written = Vec::new();
    for spec in fig.panels {
        let rows: Vec<_> =
            table.rows.iter().filter(|r| r.experiment == fig.experiment && r.panel == spec.panel).collect();
        if rows.is_empty() {
            continue;
        }
        let path = out_dir.join(format!("{}_{}.csv", fig.id, spec.panel));
        let mut w = csv::Writer::from_path(&path).map_err(|e| csv_io(&path, e))?;
        let mut header = vec!["series", spec.x];
        header.extend(spec.x2);
        header.extend([spec.value, "stderr", "n"]);
        w.write_record(&header).map_err(|e| csv_io(&path, e))?;
        for r in rows {
            let mut rec = vec![r.series.clone(), r.x.to_string()];
            if spec.x2.is_some() {
                rec.push(fmt_opt(r.x2));
            }
            rec.extend([r.value.to_string(), fmt_opt(r.stderr), fmt_opt(r.n)]);
            w.write_record(&rec).map_err(|e| csv_io(&path, e))?;
        }
        w.flush().map_err(|e| HarnessError::io(&path, e))?;
        written.push(path);
    }
    Ok(written)
}

fn csv_io(path: &Path, e: csv::Error) -> HarnessError {
    HarnessError::io(path, std::io::Error::other(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ids_are_unique_and_panels_named() {
        for (i, a) in FIGURES.iter().enumerate() {
            assert!(FIGURES[i + 1..].iter().all(|b| b.id != a.id));
            assert!(!a.panels.is_empty());
        }
    }

    #[test]
    fn emits_one_file_per_populated_panel() {
        let dir = tempfile::tempdir().unwrap();
        let mut t = ResultTable::new();
        t.population("parity-sweep", "populations", "shifted", 0.0, 1, 4);
        t.population("parity-sweep", "populations", "static", 0.0, 3, 4);
        let files = emit_plot_data(&t, "parity", dir.path()).unwrap();
        assert_eq!(files.len(), 1);
        let text = std::fs::read_to_string(&files[0]).unwrap();
        assert_eq!(text.lines().next().unwrap(), "series,delta_x_nm,p_excited,stderr,n");
        assert_eq!(text.lines().count(), 3);
        assert!(emit_plot_data(&t, "kernel", dir.path()).is_err());
        assert!(emit_plot_data(&t, "nope", dir.path()).is_err());
    }
}
