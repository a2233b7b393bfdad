//! Self-contained SVG overview: one panel per condition, score against
//! lead time, one line per application mode. Pure string building so the
//! plot is identical for identical grid states.

use std::fmt::Write;

use e4pred::grid::{Condition, GridCell, GridState, LEADS_S};
use e4pred::trainflow::ApplicationMode;

use e4pred::metrics::RocPoint;

const MODE_COLORS: [&str; 5] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e"];

const PANEL_W: f64 = 360.0;
const PANEL_H: f64 = 200.0;

/// ROC curves on one square plot with the chance diagonal. Curves are
/// drawn in the order given, cycling the palette.
pub fn roc_curves(curves: &[(String, Vec<RocPoint>)]) -> String {
    const X0: f64 = 60.0;
    const Y0: f64 = 40.0;
    const SIDE: f64 = 420.0;
    let px = |fpr: f64| X0 + fpr * SIDE;
    let py = |tpr: f64| Y0 + SIDE - tpr * SIDE;

    let mut svg = String::new();
    let _ = write!(
        svg,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 560 {:.0}\" \
         font-family=\"sans-serif\" font-size=\"11\">\n\
         <rect width=\"560\" height=\"{:.0}\" fill=\"white\"/>\n\
         <text x=\"{X0:.0}\" y=\"24\" font-size=\"14\">Pooled test ROC, best cell per condition</text>\n",
        Y0 + SIDE + 60.0 + 16.0 * curves.len() as f64,
        Y0 + SIDE + 60.0 + 16.0 * curves.len() as f64,
    );
    for tick in [0.0, 0.25, 0.5, 0.75, 1.0] {
        let _ = write!(
            svg,
            "<line x1=\"{:.1}\" y1=\"{:.1}\" x2=\"{:.1}\" y2=\"{:.1}\" stroke=\"#eee\"/>\n\
             <line x1=\"{:.1}\" y1=\"{:.1}\" x2=\"{:.1}\" y2=\"{:.1}\" stroke=\"#eee\"/>\n\
             <text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"end\">{tick:.2}</text>\n\
             <text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"middle\">{tick:.2}</text>\n",
            px(0.0),
            py(tick),
            px(1.0),
            py(tick),
            px(tick),
            py(0.0),
            px(tick),
            py(1.0),
            px(0.0) - 6.0,
            py(tick) + 4.0,
            px(tick),
            py(0.0) + 16.0,
        );
    }
    let _ = write!(
        svg,
        "<line x1=\"{:.1}\" y1=\"{:.1}\" x2=\"{:.1}\" y2=\"{:.1}\" \
         stroke=\"#999\" stroke-dasharray=\"4 4\"/>\n",
        px(0.0),
        py(0.0),
        px(1.0),
        py(1.0)
    );

    for (i, (label, points)) in curves.iter().enumerate() {
        let color = MODE_COLORS[i % MODE_COLORS.len()];
        if points.len() > 1 {
            let path: Vec<String> = points
                .iter()
                .map(|p| format!("{:.1},{:.1}", px(p.false_pos_rate), py(p.true_pos_rate)))
                .collect();
            let _ = write!(
                svg,
                "<polyline points=\"{}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\"/>\n",
                path.join(" ")
            );
        }
        let y = Y0 + SIDE + 40.0 + 16.0 * i as f64;
        let _ = write!(
            svg,
            "<rect x=\"{X0:.0}\" y=\"{:.1}\" width=\"10\" height=\"10\" fill=\"{color}\"/>\n\
             <text x=\"{:.1}\" y=\"{:.1}\">{label}</text>\n",
            y - 9.0,
            X0 + 14.0,
            y
        );
    }
    svg.push_str("</svg>\n");
    svg
}

pub fn f1_by_lead(state: &GridState) -> String {
    let mut svg = String::new();
    let _ = write!(
        svg,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 860 620\" \
         font-family=\"sans-serif\" font-size=\"11\">\n\
         <rect width=\"860\" height=\"620\" fill=\"white\"/>\n\
         <text x=\"30\" y=\"22\" font-size=\"14\">F1 by lead time</text>\n"
    );

    for (i, mode) in ApplicationMode::ALL.iter().enumerate() {
        let x = 30.0 + 160.0 * i as f64;
        let _ = write!(
            svg,
            "<rect x=\"{x:.1}\" y=\"32\" width=\"10\" height=\"10\" fill=\"{}\"/>\n\
             <text x=\"{:.1}\" y=\"41\">{}</text>\n",
            MODE_COLORS[i],
            x + 14.0,
            mode.label()
        );
    }

    for (i, condition) in Condition::ALL.iter().enumerate() {
        let x0 = 40.0 + 420.0 * (i % 2) as f64;
        let y0 = 70.0 + 270.0 * (i / 2) as f64;
        panel(&mut svg, state, condition, x0, y0);
    }

    svg.push_str("</svg>\n");
    svg
}

fn panel(svg: &mut String, state: &GridState, condition: &Condition, x0: f64, y0: f64) {
    let px = |lead: u32| x0 + f64::from(lead) / 300.0 * PANEL_W;
    let py = |f1: f64| y0 + PANEL_H - f1 * PANEL_H;

    let _ = write!(
        svg,
        "<text x=\"{x0:.1}\" y=\"{:.1}\">{}</text>\n",
        y0 - 8.0,
        condition.label()
    );
    for tick in [0.0, 0.25, 0.5, 0.75, 1.0] {
        let y = py(tick);
        let _ = write!(
            svg,
            "<line x1=\"{x0:.1}\" y1=\"{y:.1}\" x2=\"{:.1}\" y2=\"{y:.1}\" \
             stroke=\"#ddd\"/>\n\
             <text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"end\">{tick:.2}</text>\n",
            x0 + PANEL_W,
            x0 - 6.0,
            y + 4.0
        );
    }
    for lead in LEADS_S {
        let x = px(lead);
        let base = py(0.0);
        let _ = write!(
            svg,
            "<line x1=\"{x:.1}\" y1=\"{base:.1}\" x2=\"{x:.1}\" y2=\"{:.1}\" \
             stroke=\"#999\"/>\n\
             <text x=\"{x:.1}\" y=\"{:.1}\" text-anchor=\"middle\">{lead}</text>\n",
            base + 4.0,
            base + 16.0
        );
    }

    for (m, mode) in ApplicationMode::ALL.iter().enumerate() {
        let color = MODE_COLORS[m];
        let points: Vec<(f64, f64)> = LEADS_S
            .iter()
            .filter_map(|&lead_s| {
                let cell = GridCell {
                    condition: *condition,
                    mode: *mode,
                    lead_s,
                };
                state.recorded(&cell.key()).map(|f1| (px(lead_s), py(f1)))
            })
            .collect();
        if points.len() > 1 {
            let path: Vec<String> = points
                .iter()
                .map(|(x, y)| format!("{x:.1},{y:.1}"))
                .collect();
            let _ = write!(
                svg,
                "<polyline points=\"{}\" fill=\"none\" stroke=\"{color}\"/>\n",
                path.join(" ")
            );
        }
        for (x, y) in points {
            let _ = write!(
                svg,
                "<circle cx=\"{x:.1}\" cy=\"{y:.1}\" r=\"2.5\" fill=\"{color}\"/>\n"
            );
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn a_blank_grid_plots_axes_but_no_points() {
        let svg = f1_by_lead(&GridState::new());
        assert_eq!(svg.matches("<text").count() > 20, true);
        assert_eq!(svg.matches("<circle").count(), 0);
        assert!(svg.contains("w300_gate"));
        assert!(svg.contains("w60_nogate"));
    }

    #[test]
    fn roc_plot_draws_one_polyline_and_legend_row_per_curve() {
        let points = vec![
            RocPoint {
                false_pos_rate: 0.0,
                true_pos_rate: 0.0,
            },
            RocPoint {
                false_pos_rate: 0.25,
                true_pos_rate: 0.75,
            },
            RocPoint {
                false_pos_rate: 1.0,
                true_pos_rate: 1.0,
            },
        ];
        let svg = roc_curves(&[
            ("a".to_string(), points.clone()),
            ("b".to_string(), points),
        ]);
        assert_eq!(svg.matches("<polyline").count(), 2);
        assert!(svg.contains(">a</text>"));
        assert!(svg.contains(">b</text>"));

        let empty = roc_curves(&[]);
        assert_eq!(empty.matches("<polyline").count(), 0);
        assert!(empty.contains("stroke-dasharray"));
    }

    #[test]
    fn each_recorded_cell_adds_one_point() {
        let mut state = GridState::new();
        state.record("w300_gate_pretrained_direct_l0", 0.5).unwrap();
        state.record("w300_gate_pretrained_direct_l60", 0.6).unwrap();
        let svg = f1_by_lead(&state);
        assert_eq!(svg.matches("<circle").count(), 2);
        assert_eq!(svg.matches("<polyline").count(), 1);
    }
}
