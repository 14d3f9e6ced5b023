//! Comparison tables and per-field panel dumps.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::RunReport;
use crate::episode::EpisodeReport;
use crate::error::Result;
use crate::field::{GridSpec, VisualField};

const CSV_HEADER: &str = "strategy,sigma_stop,fields,seeds,stimuli_mean,stimuli_std,mse_mean,mse_std";

pub fn render_table_csv(reports: &[RunReport]) -> String {
    let mut out = format!("{CSV_HEADER}\n");
    for r in reports {
        let _ = writeln!(
            out,
            "{},{},{},{},{:.4},{:.4},{:.4},{:.4}",
            r.strategy,
            r.sigma_stop,
            r.fields,
            r.per_seed.len(),
            r.stimuli_mean,
            r.stimuli_std,
            r.mse_mean,
            r.mse_std
        );
    }
    out
}

pub fn render_table_markdown(reports: &[RunReport]) -> String {
    let mut out = String::from("| strategy | σ | fields | seeds | stimuli | MSE |\n|---|---|---|---|---|---|\n");
    for r in reports {
        let _ = writeln!(
            out,
            "| {} | {} | {} | {} | {:.2} ± {:.2} | {:.3} ± {:.3} |",
            r.strategy,
            r.sigma_stop,
            r.fields,
            r.per_seed.len(),
            r.stimuli_mean,
            r.stimuli_std,
            r.mse_mean,
            r.mse_std
        );
    }
    out
}

/// The five per-field grids: ground truth, reconstruction, initial
/// stimulus, test order and stimuli per location. Masked cells are `None`.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldPanels {
    pub truth: Vec<Option<u32>>,
    pub reconstruction: Vec<Option<u32>>,
    pub initial: Vec<Option<u32>>,
    pub sequence: Vec<Option<u32>>,
    pub counts: Vec<Option<u32>>,
}

impl FieldPanels {
    pub fn new(grid: &GridSpec, truth: &VisualField, episode: &EpisodeReport) -> Self {
        let layout = |per_loc: &dyn Fn(usize) -> u32| {
            let mut g = vec![None; grid.area()];
            for l in 0..grid.len() {
                g[grid.offset(l)] = Some(per_loc(l));
            }
            g
        };
        let mut rank = vec![0u32; grid.len()];
        for (k, &l) in episode.order.iter().enumerate() {
            rank[l] = k as u32;
        }
        Self {
            truth: layout(&|l| truth.values()[l] as u32),
            reconstruction: layout(&|l| episode.reconstruction[l] as u32),
            initial: layout(&|l| episode.initial_values[l] as u32),
            sequence: layout(&|l| rank[l]),
            counts: layout(&|l| episode.per_location_stimuli[l]),
        }
    }

    pub fn named(&self) -> [(&'static str, &[Option<u32>]); 5] {
        [
            ("ground truth", &self.truth),
            ("reconstruction", &self.reconstruction),
            ("initial stimulus", &self.initial),
            ("sequence", &self.sequence),
            ("stimuli per location", &self.counts),
        ]
    }
}

fn grid_text(cells: &[Option<u32>], cols: usize, csv: bool) -> String {
    let mut out = String::new();
    for row in cells.chunks(cols) {
        let items: Vec<String> = row
            .iter()
            .map(|c| match (c, csv) {
                (Some(v), true) => v.to_string(),
                (None, true) => String::new(),
                (Some(v), false) => format!("{v:>3}"),
                (None, false) => "  .".to_string(),
            })
            .collect();
        out.push_str(&items.join(if csv { "," } else { " " }));
        out.push('\n');
    }
    out
}

/// Text rendering of all five panels; with `csv` each panel is a block of
/// comma-separated rows headed by `# name`.
pub fn render_panels(grid: &GridSpec, panels: &FieldPanels, csv: bool) -> String {
    let mut out = String::new();
    for (name, cells) in panels.named() {
        let _ = writeln!(out, "{}{name}", if csv { "# " } else { "" });
        out.push_str(&grid_text(cells, grid.cols(), csv));
        out.push('\n');
    }
    out
}

/// Writes `summary.csv`, `summary.md` and, per panel set, `field_<name>.txt`
/// and `field_<name>.csv` into `dir`.
pub fn write_report(dir: &Path, grid: &GridSpec, reports: &[RunReport], panels: &[(String, FieldPanels)]) -> Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join("summary.csv"), render_table_csv(reports))?;
    fs::write(dir.join("summary.md"), render_table_markdown(reports))?;
    for (name, p) in panels {
        fs::write(dir.join(format!("field_{name}.txt")), render_panels(grid, p, false))?;
        fs::write(dir.join(format!("field_{name}.csv")), render_panels(grid, p, true))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::SeedSummary;

    fn report(sigma: f64) -> RunReport {
        RunReport::from_seeds(
            "random_zest",
            sigma,
            10,
            vec![SeedSummary { seed: 1, mean_stimuli: 300.0, mean_mse: 2.0 }],
        )
        .unwrap()
    }

    #[test]
    fn empty_table_has_header_only() {
        assert_eq!(render_table_csv(&[]), format!("{CSV_HEADER}\n"));
        assert_eq!(render_table_markdown(&[]).lines().count(), 2);
    }

    #[test]
    fn one_row_per_report() {
        let rs: Vec<_> = [1.0, 2.0, 3.0].map(report).into();
        assert_eq!(render_table_csv(&rs).lines().count(), 4);
        assert_eq!(render_table_markdown(&rs).lines().count(), 5);
    }

    #[test]
    fn sequence_panel_is_a_permutation() {
        let g = GridSpec::standard();
        let order: Vec<usize> = (0..54).rev().collect();
        let ep = EpisodeReport {
            total_stimuli: 54,
            reconstruction: vec![10; 54],
            mse: Some(0.0),
            per_location_stimuli: vec![1; 54],
            order,
            initial_values: vec![20; 54],
        };
        let truth = VisualField::uniform(10, g).unwrap();
        let p = FieldPanels::new(g, &truth, &ep);
        let mut seq: Vec<u32> = p.sequence.iter().flatten().copied().collect();
        assert_eq!(seq.len(), 54);
        seq.sort_unstable();
        assert_eq!(seq, (0..54).collect::<Vec<_>>());
        assert_eq!(p.truth.iter().filter(|c| c.is_none()).count(), 72 - 54);
        let text = render_panels(g, &p, false);
        assert!(text.contains("  ."));
        let csv = render_panels(g, &p, true);
        assert_eq!(csv.lines().filter(|l| l.starts_with('#')).count(), 5);
    }
}
