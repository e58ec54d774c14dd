//! Minimal SVG line-chart emitter: axes, optional log-y scale, legend.
//!
//! Every data point passed in is rendered; there is no resampling.

const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#17becf", "#7f7f7f",
];

const WIDTH: f64 = 760.0;
const HEIGHT: f64 = 480.0;
const MARGIN_LEFT: f64 = 78.0;
const MARGIN_RIGHT: f64 = 180.0;
const MARGIN_TOP: f64 = 40.0;
const MARGIN_BOTTOM: f64 = 56.0;

#[derive(Clone, Debug)]
pub struct Series {
    pub name: String,
    pub points: Vec<(f64, f64)>,
}

#[derive(Clone, Debug)]
pub struct LineChart {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub log_y: bool,
    pub series: Vec<Series>,
}

impl LineChart {
    pub fn new(title: &str, x_label: &str, y_label: &str, log_y: bool) -> Self {
        LineChart {
            title: title.to_string(),
            x_label: x_label.to_string(),
            y_label: y_label.to_string(),
            log_y,
            series: Vec::new(),
        }
    }

    pub fn add_series(&mut self, name: &str, points: Vec<(f64, f64)>) {
        self.series.push(Series {
            name: name.to_string(),
            points,
        });
    }

    fn y_transform(&self, y: f64) -> Option<f64> {
        if self.log_y {
            if y > 0.0 {
                Some(y.log10())
            } else {
                None
            }
        } else {
            Some(y)
        }
    }

    /// Points that will actually be rendered (log scale drops nonpositive y).
    pub fn rendered_points(&self) -> usize {
        self.series
            .iter()
            .map(|s| {
                s.points
                    .iter()
                    .filter(|(_, y)| self.y_transform(*y).is_some())
                    .count()
            })
            .sum()
    }

    pub fn to_svg(&self) -> String {
        let mut xs: Vec<f64> = Vec::new();
        let mut ys: Vec<f64> = Vec::new();
        for s in &self.series {
            for &(x, y) in &s.points {
                if let Some(ty) = self.y_transform(y) {
                    xs.push(x);
                    ys.push(ty);
                }
            }
        }
        let (x_min, x_max) = bounds(&xs);
        let (y_min, y_max) = bounds(&ys);
        let plot_w = WIDTH - MARGIN_LEFT - MARGIN_RIGHT;
        let plot_h = HEIGHT - MARGIN_TOP - MARGIN_BOTTOM;
        let px = |x: f64| MARGIN_LEFT + (x - x_min) / (x_max - x_min) * plot_w;
        let py = |y: f64| MARGIN_TOP + (1.0 - (y - y_min) / (y_max - y_min)) * plot_h;

        let mut svg = String::new();
        svg.push_str(&format!(
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" \
             viewBox=\"0 0 {WIDTH} {HEIGHT}\" font-family=\"sans-serif\" font-size=\"12\">\n"
        ));
        svg.push_str(&format!(
            "<rect width=\"{WIDTH}\" height=\"{HEIGHT}\" fill=\"white\"/>\n"
        ));
        svg.push_str(&format!(
            "<text x=\"{}\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">{}</text>\n",
            MARGIN_LEFT + plot_w / 2.0,
            escape(&self.title)
        ));

        // Frame.
        svg.push_str(&format!(
            "<rect x=\"{MARGIN_LEFT}\" y=\"{MARGIN_TOP}\" width=\"{plot_w}\" height=\"{plot_h}\" \
             fill=\"none\" stroke=\"#333\"/>\n"
        ));

        // Ticks.
        for i in 0..=5 {
            let t = i as f64 / 5.0;
            let x_val = x_min + t * (x_max - x_min);
            let x_pix = px(x_val);
            svg.push_str(&format!(
                "<line x1=\"{x_pix}\" y1=\"{}\" x2=\"{x_pix}\" y2=\"{}\" stroke=\"#333\"/>\n",
                MARGIN_TOP + plot_h,
                MARGIN_TOP + plot_h + 5.0
            ));
            svg.push_str(&format!(
                "<text x=\"{x_pix}\" y=\"{}\" text-anchor=\"middle\">{}</text>\n",
                MARGIN_TOP + plot_h + 20.0,
                format_tick(x_val, false)
            ));
            let y_val = y_min + t * (y_max - y_min);
            let y_pix = py(y_val);
            svg.push_str(&format!(
                "<line x1=\"{}\" y1=\"{y_pix}\" x2=\"{MARGIN_LEFT}\" y2=\"{y_pix}\" stroke=\"#333\"/>\n",
                MARGIN_LEFT - 5.0
            ));
            svg.push_str(&format!(
                "<text x=\"{}\" y=\"{}\" text-anchor=\"end\">{}</text>\n",
                MARGIN_LEFT - 9.0,
                y_pix + 4.0,
                format_tick(y_val, self.log_y)
            ));
        }

        svg.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">{}</text>\n",
            MARGIN_LEFT + plot_w / 2.0,
            HEIGHT - 14.0,
            escape(&self.x_label)
        ));
        svg.push_str(&format!(
            "<text x=\"20\" y=\"{}\" text-anchor=\"middle\" transform=\"rotate(-90 20 {})\">{}</text>\n",
            MARGIN_TOP + plot_h / 2.0,
            MARGIN_TOP + plot_h / 2.0,
            escape(&self.y_label)
        ));

        for (i, s) in self.series.iter().enumerate() {
            let color = PALETTE[i % PALETTE.len()];
            let coords: Vec<String> = s
                .points
                .iter()
                .filter_map(|&(x, y)| {
                    self.y_transform(y)
                        .map(|ty| format!("{:.2},{:.2}", px(x), py(ty)))
                })
                .collect();
            if !coords.is_empty() {
                svg.push_str(&format!(
                    "<polyline points=\"{}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"1.6\"/>\n",
                    coords.join(" ")
                ));
            }
            // Legend entry.
            let ly = MARGIN_TOP + 16.0 * i as f64 + 8.0;
            let lx = WIDTH - MARGIN_RIGHT + 12.0;
            svg.push_str(&format!(
                "<line x1=\"{lx}\" y1=\"{ly}\" x2=\"{}\" y2=\"{ly}\" stroke=\"{color}\" stroke-width=\"2\"/>\n",
                lx + 22.0
            ));
            svg.push_str(&format!(
                "<text x=\"{}\" y=\"{}\">{}</text>\n",
                lx + 28.0,
                ly + 4.0,
                escape(&s.name)
            ));
        }
        svg.push_str("</svg>\n");
        svg
    }
}

fn bounds(values: &[f64]) -> (f64, f64) {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for &v in values {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    if !lo.is_finite() || !hi.is_finite() {
        return (0.0, 1.0);
    }
    if (hi - lo).abs() < 1e-300 {
        (lo - 0.5, hi + 0.5)
    } else {
        (lo, hi)
    }
}

fn format_tick(value: f64, log: bool) -> String {
    if log {
        return format!("1e{value:.1}");
    }
    if value == 0.0 {
        return "0".to_string();
    }
    let magnitude = value.abs();
    if magnitude >= 1e4 || magnitude < 1e-2 {
        format!("{value:.1e}")
    } else {
        format!("{value:.3}")
    }
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
