use crate::{io_err, Result, ResultsTable};
use hiact_controller::RolloutTrace;
use std::fs;
use std::path::Path;

const GRID_HEADER: &str =
    "condition,haptic,recovery,trials,pick_rate,delivery_rate,mean_grasp_attempts,loop_failure_rate,eval_seed";
const GEN_HEADER: &str =
    "variant,size_multiplier,contrast,trials,pick_rate,delivery_rate,mean_grasp_attempts,loop_failure_rate,eval_seed";
const TRACE_HEADER: &str = "step,x,y,z,g,f_x,f_y,f_z,phase_flags";

/// Render a results table as CSV. `grid` selects the condition-style
/// header; otherwise variant columns are used. Values carry six decimals.
pub fn write_results_csv(table: &ResultsTable, grid: bool) -> String {
    let mut out = String::from(if grid { GRID_HEADER } else { GEN_HEADER });
    out.push('\n');
    for r in &table.rows {
        if grid {
            out.push_str(&format!(
                "{},{},{},{},{:.6},{:.6},{:.6},{:.6},{}\n",
                r.label,
                r.haptic,
                r.recovery,
                r.trials,
                r.pick_rate,
                r.delivery_rate,
                r.mean_grasp_attempts,
                r.loop_failure_rate,
                r.eval_seed
            ));
        } else {
            out.push_str(&format!(
                "{},{:.6},{:.6},{},{:.6},{:.6},{:.6},{:.6},{}\n",
                r.label,
                r.size_multiplier,
                r.contrast,
                r.trials,
                r.pick_rate,
                r.delivery_rate,
                r.mean_grasp_attempts,
                r.loop_failure_rate,
                r.eval_seed
            ));
        }
    }
    out
}

/// Per-step force and pose trace of one trial. `phase_flags` is a bitmask:
/// bit 0 holding, bit 1 grasp_acquired, bit 2 pick_success,
/// bit 3 slip_occurred, bit 4 delivery_success.
pub fn write_force_trace_csv(trace: &RolloutTrace) -> String {
    let mut out = String::from(TRACE_HEADER);
    out.push('\n');
    for (i, step) in trace.steps.iter().enumerate() {
        let p = step.observation.proprio;
        let f = step.observation.force;
        let flags = (step.holding as u32)
            | ((step.flags.grasp_acquired as u32) << 1)
            | ((step.flags.pick_success as u32) << 2)
            | ((step.flags.slip_occurred as u32) << 3)
            | ((step.flags.delivery_success as u32) << 4);
        out.push_str(&format!(
            "{},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{}\n",
            i, p[0], p[1], p[2], p[3], f[0], f[1], f[2], flags
        ));
    }
    out
}

fn markdown_table(csv: &str) -> String {
    let mut lines = csv.lines();
    let header = lines.next().unwrap_or_default();
    let mut out = String::new();
    let cols = header.split(',').count();
    out.push_str(&format!("| {} |\n", header.split(',').collect::<Vec<_>>().join(" | ")));
    out.push_str(&format!("|{}\n", " --- |".repeat(cols)));
    for line in lines {
        out.push_str(&format!("| {} |\n", line.split(',').collect::<Vec<_>>().join(" | ")));
    }
    out
}

/// The CSV payloads a report is rendered from.
#[derive(Debug, Clone, Default)]
pub struct ReportInputs {
    pub grid_csv: Option<String>,
    pub generalization_csv: Option<String>,
    pub trace_names: Vec<String>,
}

/// Render report.md purely from CSV contents, so regenerating from saved
/// CSVs reproduces the report byte for byte.
pub fn render_report(inputs: &ReportInputs) -> String {
    let mut out = String::from("# Evaluation report\n");
    if let Some(csv) = &inputs.grid_csv {
        out.push_str("\n## Condition grid\n\n");
        out.push_str("Paired trials: every condition faces the same evaluation episodes.\n\n");
        out.push_str(&markdown_table(csv));
    }
    if let Some(csv) = &inputs.generalization_csv {
        out.push_str("\n## Object generalization\n\n");
        out.push_str("Size multipliers are longest-dimension ratios against the reference seed.\n\n");
        out.push_str(&markdown_table(csv));
    }
    if !inputs.trace_names.is_empty() {
        out.push_str("\n## Force traces\n\n");
        for name in &inputs.trace_names {
            out.push_str(&format!("- `force_trace_{name}.csv`\n"));
        }
    }
    out
}

/// Write grid.csv / generalization.csv / force_trace_*.csv / report.md.
pub fn emit_report(
    out_dir: &Path,
    grid: Option<&ResultsTable>,
    generalization: Option<&ResultsTable>,
    traces: &[(String, RolloutTrace)],
) -> Result<()> {
    fs::create_dir_all(out_dir).map_err(io_err(out_dir))?;
    let mut inputs = ReportInputs::default();

    let grid_path = out_dir.join("grid.csv");
    let csv = write_results_csv(grid.unwrap_or(&ResultsTable::default()), true);
    fs::write(&grid_path, &csv).map_err(io_err(&grid_path))?;
    if grid.is_some() {
        inputs.grid_csv = Some(csv);
    }

    let gen_path = out_dir.join("generalization.csv");
    let csv = write_results_csv(generalization.unwrap_or(&ResultsTable::default()), false);
    fs::write(&gen_path, &csv).map_err(io_err(&gen_path))?;
    if generalization.is_some() {
        inputs.generalization_csv = Some(csv);
    }

    for (name, trace) in traces {
        let path = out_dir.join(format!("force_trace_{name}.csv"));
        fs::write(&path, write_force_trace_csv(trace)).map_err(io_err(&path))?;
        inputs.trace_names.push(name.clone());
    }

    let report_path = out_dir.join("report.md");
    fs::write(&report_path, render_report(&inputs)).map_err(io_err(&report_path))?;
    Ok(())
}
