//! Static SVG rendering of EDF curves, one figure per (experiment, m).

use rotatest::montecarlo::EDFSample;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 420.0;
const MARGIN: f64 = 50.0;
const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];

/// Render the step EDF curves of all samples into one SVG document.
pub fn edf_curves(samples: &[&EDFSample], title: &str) -> String {
    let x_max = samples
        .iter()
        .flat_map(|s| s.values.last().copied())
        .fold(0.0_f64, f64::max)
        .max(1e-12);

    let to_px = |ks: f64, prob: f64| -> (f64, f64) {
        let x = MARGIN + ks / x_max * (WIDTH - 2.0 * MARGIN);
        let y = HEIGHT - MARGIN - prob * (HEIGHT - 2.0 * MARGIN);
        (x, y)
    };

    let mut out = String::new();
    out.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" viewBox=\"0 0 {WIDTH} {HEIGHT}\">\n"
    ));
    out.push_str(&format!(
        "<text x=\"{}\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"15\">{title}</text>\n",
        WIDTH / 2.0
    ));
    // axes
    out.push_str(&format!(
        "<line x1=\"{m}\" y1=\"{b}\" x2=\"{r}\" y2=\"{b}\" stroke=\"black\"/>\n<line x1=\"{m}\" y1=\"{t}\" x2=\"{m}\" y2=\"{b}\" stroke=\"black\"/>\n",
        m = MARGIN,
        b = HEIGHT - MARGIN,
        r = WIDTH - MARGIN,
        t = MARGIN
    ));
    out.push_str(&format!(
        "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">KS statistic</text>\n",
        WIDTH / 2.0,
        HEIGHT - 12.0
    ));
    for frac in [0.0, 0.25, 0.5, 0.75, 1.0] {
        let (x, y) = to_px(frac * x_max, 0.0);
        out.push_str(&format!(
            "<text x=\"{x}\" y=\"{}\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"10\">{:.2}</text>\n",
            y + 16.0,
            frac * x_max
        ));
        let (x0, y0) = to_px(0.0, frac);
        out.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"10\">{frac:.2}</text>\n",
            x0 - 6.0,
            y0 + 3.0
        ));
    }

    for (idx, sample) in samples.iter().enumerate() {
        let color = COLORS[idx % COLORS.len()];
        let n = sample.values.len();
        let mut points = String::new();
        let (x, y) = to_px(0.0, 0.0);
        points.push_str(&format!("{x:.1},{y:.1}"));
        for (i, &ks) in sample.values.iter().enumerate() {
            let prob = (i + 1) as f64 / n as f64;
            let (x, y) = to_px(ks, prob);
            points.push_str(&format!(" {x:.1},{y:.1}"));
        }
        out.push_str(&format!(
            "<polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"1.3\" points=\"{points}\"/>\n"
        ));
        let ly = MARGIN + 16.0 * idx as f64;
        out.push_str(&format!(
            "<line x1=\"{lx}\" y1=\"{ly}\" x2=\"{}\" y2=\"{ly}\" stroke=\"{color}\" stroke-width=\"2\"/>\n<text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"11\">{}</text>\n",
            WIDTH - MARGIN - 96.0 + 24.0,
            WIDTH - MARGIN - 96.0 + 30.0,
            ly + 4.0,
            sample.generator,
            lx = WIDTH - MARGIN - 96.0,
        ));
    }
    out.push_str("</svg>\n");
    out
}
