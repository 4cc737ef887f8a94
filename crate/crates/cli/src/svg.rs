use std::fmt::Write;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 400.0;
const LEFT: f64 = 64.0;
const RIGHT: f64 = 150.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 56.0;
const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];

/// One polyline with optional symmetric error bars.
#[derive(Clone, Debug)]
pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
    pub errors: Option<Vec<f64>>,
}

/// One bar with an optional symmetric error bar.
#[derive(Clone, Debug)]
pub struct Bar {
    pub label: String,
    pub value: f64,
    pub error: Option<f64>,
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

struct Frame {
    x: (f64, f64),
    y: (f64, f64),
}

impl Frame {
    fn new(x: (f64, f64), y: (f64, f64)) -> Self {
        let widen = |(lo, hi): (f64, f64)| {
            if !(lo.is_finite() && hi.is_finite()) {
                (0.0, 1.0)
            } else if hi - lo < 1e-12 {
                (lo - 0.5, hi + 0.5)
            } else {
                (lo, hi)
            }
        };
        Self { x: widen(x), y: widen(y) }
    }

    fn px(&self, x: f64) -> f64 {
        LEFT + (x - self.x.0) / (self.x.1 - self.x.0) * (WIDTH - LEFT - RIGHT)
    }

    fn py(&self, y: f64) -> f64 {
        HEIGHT - BOTTOM - (y - self.y.0) / (self.y.1 - self.y.0) * (HEIGHT - TOP - BOTTOM)
    }
}

fn header(out: &mut String, title: &str, x_label: &str, y_label: &str) {
    let _ = write!(
        out,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" viewBox=\"0 0 {WIDTH} {HEIGHT}\" font-family=\"sans-serif\" font-size=\"12\">\n\
         <rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n\
         <text x=\"{:.1}\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">{}</text>\n\
         <text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"middle\">{}</text>\n\
         <text x=\"16\" y=\"{:.1}\" text-anchor=\"middle\" transform=\"rotate(-90 16 {:.1})\">{}</text>\n",
        (LEFT + WIDTH - RIGHT) / 2.0,
        escape(title),
        (LEFT + WIDTH - RIGHT) / 2.0,
        HEIGHT - 14.0,
        escape(x_label),
        (TOP + HEIGHT - BOTTOM) / 2.0,
        (TOP + HEIGHT - BOTTOM) / 2.0,
        escape(y_label),
    );
}

fn axes(out: &mut String, frame: &Frame, x_ticks: &[(f64, String)]) {
    let (x0, x1) = (LEFT, WIDTH - RIGHT);
    let (y0, y1) = (HEIGHT - BOTTOM, TOP);
    let _ = writeln!(
        out,
        "<path d=\"M{x0:.1},{y1:.1} L{x0:.1},{y0:.1} L{x1:.1},{y0:.1}\" fill=\"none\" stroke=\"black\"/>"
    );
    for k in 0..=4 {
        let v = frame.y.0 + (frame.y.1 - frame.y.0) * k as f64 / 4.0;
        let y = frame.py(v);
        let _ = writeln!(
            out,
            "<line x1=\"{x0:.1}\" y1=\"{y:.1}\" x2=\"{x1:.1}\" y2=\"{y:.1}\" stroke=\"#dddddd\"/>\n\
             <text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"end\">{v:.2}</text>",
            x0 - 6.0,
            y + 4.0
        );
    }
    for (v, label) in x_ticks {
        let x = frame.px(*v);
        let _ = writeln!(
            out,
            "<line x1=\"{x:.1}\" y1=\"{y0:.1}\" x2=\"{x:.1}\" y2=\"{:.1}\" stroke=\"black\"/>\n\
             <text x=\"{x:.1}\" y=\"{:.1}\" text-anchor=\"middle\">{}</text>",
            y0 + 5.0,
            y0 + 18.0,
            escape(label)
        );
    }
}

fn legend(out: &mut String, labels: &[&str]) {
    for (i, label) in labels.iter().enumerate() {
        let y = TOP + 10.0 + 18.0 * i as f64;
        let x = WIDTH - RIGHT + 14.0;
        let _ = writeln!(
            out,
            "<rect x=\"{x:.1}\" y=\"{:.1}\" width=\"12\" height=\"12\" fill=\"{}\"/>\n\
             <text x=\"{:.1}\" y=\"{:.1}\">{}</text>",
            y - 10.0,
            PALETTE[i % PALETTE.len()],
            x + 18.0,
            y,
            escape(label)
        );
    }
}

fn error_bar(out: &mut String, frame: &Frame, x: f64, y: f64, e: f64, color: &str) {
    if !e.is_finite() || e <= 0.0 {
        return;
    }
    let (px, lo, hi) = (frame.px(x), frame.py(y - e), frame.py(y + e));
    let _ = writeln!(
        out,
        "<path d=\"M{px:.1},{lo:.1} L{px:.1},{hi:.1} M{:.1},{lo:.1} L{:.1},{lo:.1} M{:.1},{hi:.1} L{:.1},{hi:.1}\" stroke=\"{color}\" fill=\"none\"/>",
        px - 4.0,
        px + 4.0,
        px - 4.0,
        px + 4.0
    );
}

/// Line chart; each series gets a color and a legend entry.
pub fn line_chart(title: &str, x_label: &str, y_label: &str, series: &[Series]) -> String {
    let finite = |v: f64| v.is_finite();
    let xs = series.iter().flat_map(|s| s.points.iter().map(|p| p.0)).filter(|&v| finite(v));
    let (x_lo, x_hi) = xs.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    let mut y_lo = f64::INFINITY;
    let mut y_hi = f64::NEG_INFINITY;
    for s in series {
        for (i, &(_, y)) in s.points.iter().enumerate() {
            let e = s.errors.as_ref().map_or(0.0, |e| if e[i].is_finite() { e[i] } else { 0.0 });
            if finite(y) {
                y_lo = y_lo.min(y - e);
                y_hi = y_hi.max(y + e);
            }
        }
    }
    let frame = Frame::new((x_lo, x_hi), (y_lo, y_hi));
    let mut ticks: Vec<f64> = series.iter().flat_map(|s| s.points.iter().map(|p| p.0)).filter(|&v| finite(v)).collect();
    ticks.sort_by(f64::total_cmp);
    ticks.dedup();
    if ticks.len() > 12 {
        let step = ticks.len().div_ceil(12);
        ticks = ticks.into_iter().step_by(step).collect();
    }
    let tick_labels: Vec<(f64, String)> = ticks.iter().map(|&v| (v, format!("{v}"))).collect();

    let mut out = String::new();
    header(&mut out, title, x_label, y_label);
    axes(&mut out, &frame, &tick_labels);
    for (i, s) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let pts: Vec<String> = s
            .points
            .iter()
            .filter(|p| finite(p.0) && finite(p.1))
            .map(|&(x, y)| format!("{:.1},{:.1}", frame.px(x), frame.py(y)))
            .collect();
        let _ = writeln!(out, "<polyline points=\"{}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"2\"/>", pts.join(" "));
        for (k, &(x, y)) in s.points.iter().enumerate() {
            if !(finite(x) && finite(y)) {
                continue;
            }
            let _ = writeln!(out, "<circle cx=\"{:.1}\" cy=\"{:.1}\" r=\"3\" fill=\"{color}\"/>", frame.px(x), frame.py(y));
            if let Some(errors) = &s.errors {
                error_bar(&mut out, &frame, x, y, errors[k], color);
            }
        }
    }
    legend(&mut out, &series.iter().map(|s| s.label.as_str()).collect::<Vec<_>>());
    out.push_str("</svg>\n");
    out
}

/// Vertical bar chart with the value printed above each bar.
pub fn bar_chart(title: &str, y_label: &str, bars: &[Bar]) -> String {
    let top = bars
        .iter()
        .map(|b| b.value + b.error.filter(|e| e.is_finite()).unwrap_or(0.0))
        .filter(|v| v.is_finite())
        .fold(0.0f64, f64::max);
    let n = bars.len().max(1) as f64;
    let frame = Frame::new((0.0, n), (0.0, top * 1.1));
    let mut out = String::new();
    header(&mut out, title, "", y_label);
    let ticks: Vec<(f64, String)> = bars.iter().enumerate().map(|(i, b)| (i as f64 + 0.5, b.label.clone())).collect();
    axes(&mut out, &frame, &ticks);
    let slot = frame.px(1.0) - frame.px(0.0);
    for (i, b) in bars.iter().enumerate() {
        if !b.value.is_finite() {
            continue;
        }
        let color = PALETTE[i % PALETTE.len()];
        let (x, y) = (frame.px(i as f64) + 0.2 * slot, frame.py(b.value));
        let _ = writeln!(
            out,
            "<rect x=\"{x:.1}\" y=\"{y:.1}\" width=\"{:.1}\" height=\"{:.1}\" fill=\"{color}\"/>\n\
             <text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"middle\">{:.2}</text>",
            0.6 * slot,
            frame.py(0.0) - y,
            x + 0.3 * slot,
            y - 6.0,
            b.value
        );
        if let Some(e) = b.error {
            error_bar(&mut out, &frame, i as f64 + 0.5, b.value, e, "black");
        }
    }
    out.push_str("</svg>\n");
    out
}
