//! Per-phase accuracy line plot, written directly as SVG.

use crate::eval::EvalReport;
use std::fmt::Write;

const W: f64 = 640.0;
const H: f64 = 400.0;
const MARGIN_L: f64 = 60.0;
const MARGIN_R: f64 = 20.0;
const MARGIN_T: f64 = 30.0;
const MARGIN_B: f64 = 50.0;

/// Accuracy-per-phase polyline with a 0..1 y axis.
pub fn phase_accuracy_svg(report: &EvalReport) -> String {
    let n = report.phases.len().max(1);
    let plot_w = W - MARGIN_L - MARGIN_R;
    let plot_h = H - MARGIN_T - MARGIN_B;
    let x = |i: usize| {
        if n == 1 {
            MARGIN_L + plot_w / 2.0
        } else {
            MARGIN_L + plot_w * i as f64 / (n - 1) as f64
        }
    };
    let y = |acc: f64| MARGIN_T + plot_h * (1.0 - acc);

    let mut s = String::new();
    let _ = writeln!(
        s,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 {W} {H}\" font-family=\"monospace\" font-size=\"12\">"
    );
    let _ = writeln!(s, "<rect width=\"{W}\" height=\"{H}\" fill=\"white\"/>");
    let _ = writeln!(
        s,
        "<text x=\"{:.1}\" y=\"18\" text-anchor=\"middle\">accuracy on classes seen so far ({})</text>",
        W / 2.0,
        report.label
    );

    // y grid and labels
    for tick in 0..=5 {
        let acc = tick as f64 / 5.0;
        let yy = y(acc);
        let _ = writeln!(
            s,
            "<line x1=\"{MARGIN_L:.1}\" y1=\"{yy:.1}\" x2=\"{:.1}\" y2=\"{yy:.1}\" stroke=\"#ddd\"/>",
            W - MARGIN_R
        );
        let _ = writeln!(
            s,
            "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"end\">{acc:.1}</text>",
            MARGIN_L - 8.0,
            yy + 4.0
        );
    }

    // x labels per phase
    for (i, p) in report.phases.iter().enumerate() {
        let xx = x(i);
        let _ = writeln!(
            s,
            "<text x=\"{xx:.1}\" y=\"{:.1}\" text-anchor=\"middle\">p{}</text>",
            H - MARGIN_B + 20.0,
            p.phase
        );
    }
    let _ = writeln!(
        s,
        "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"middle\">phase (strategy: {})</text>",
        W / 2.0,
        H - 12.0,
        report.strategy.name()
    );

    // axis frame
    let _ = writeln!(
        s,
        "<line x1=\"{MARGIN_L:.1}\" y1=\"{MARGIN_T:.1}\" x2=\"{MARGIN_L:.1}\" y2=\"{:.1}\" stroke=\"black\"/>",
        H - MARGIN_B
    );
    let _ = writeln!(
        s,
        "<line x1=\"{MARGIN_L:.1}\" y1=\"{:.1}\" x2=\"{:.1}\" y2=\"{:.1}\" stroke=\"black\"/>",
        H - MARGIN_B,
        W - MARGIN_R,
        H - MARGIN_B
    );

    if !report.phases.is_empty() {
        let points: Vec<String> = report
            .phases
            .iter()
            .enumerate()
            .map(|(i, p)| format!("{:.1},{:.1}", x(i), y(p.accuracy as f64)))
            .collect();
        let _ = writeln!(
            s,
            "<polyline points=\"{}\" fill=\"none\" stroke=\"#1f77b4\" stroke-width=\"2\"/>",
            points.join(" ")
        );
        for (i, p) in report.phases.iter().enumerate() {
            let _ = writeln!(
                s,
                "<circle cx=\"{:.1}\" cy=\"{:.1}\" r=\"3\" fill=\"#1f77b4\"/>",
                x(i),
                y(p.accuracy as f64)
            );
            let _ = writeln!(
                s,
                "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"middle\">{:.3}</text>",
                x(i),
                y(p.accuracy as f64) - 8.0,
                p.accuracy
            );
        }
    }
    s.push_str("</svg>\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::Strategy;

    #[test]
    fn svg_contains_one_point_per_phase() {
        let mut r = EvalReport::new(Strategy::Avg, "demo");
        r.push(0, 4, 0.9);
        r.push(1, 6, 0.8);
        r.push(2, 8, 0.7);
        let svg = phase_accuracy_svg(&r);
        assert!(svg.starts_with("<svg"));
        assert_eq!(svg.matches("<circle").count(), 3);
        assert!(svg.contains("polyline"));
        assert!(svg.ends_with("</svg>\n"));
    }
}
