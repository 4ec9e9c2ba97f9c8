//! Self-contained SVG figures: a single time series against its bound, and
//! a percentile band with extremes and mean.

use std::fmt::Write;

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 420.0;
const LEFT: f64 = 64.0;
const RIGHT: f64 = 16.0;
const TOP: f64 = 32.0;
const BOTTOM: f64 = 48.0;
const TICKS: usize = 5;

struct Frame {
    t_max: f64,
    y_max: f64,
}

impl Frame {
    fn new(times: &[f64], series: &[&[f64]], bound: Option<f64>) -> Self {
        let t_max = times.last().copied().unwrap_or(1.0).max(f64::MIN_POSITIVE);
        let peak = series
            .iter()
            .flat_map(|s| s.iter().copied())
            .chain(bound)
            .filter(|v| v.is_finite())
            .fold(0.0, f64::max);
        let y_max = if peak > 0.0 { 1.05 * peak } else { 1.0 };
        Frame { t_max, y_max }
    }

    fn x(&self, t: f64) -> f64 {
        LEFT + (WIDTH - LEFT - RIGHT) * t / self.t_max
    }

    fn y(&self, v: f64) -> f64 {
        HEIGHT - BOTTOM - (HEIGHT - TOP - BOTTOM) * v.clamp(0.0, self.y_max) / self.y_max
    }

    fn points<'a>(
        &'a self,
        times: &'a [f64],
        values: &'a [f64],
    ) -> impl Iterator<Item = String> + 'a {
        times
            .iter()
            .zip(values)
            .map(|(&t, &v)| format!("{:.2},{:.2}", self.x(t), self.y(v)))
    }

    fn polyline(&self, svg: &mut String, times: &[f64], values: &[f64], style: &str) {
        let pts: Vec<String> = self.points(times, values).collect();
        let _ = writeln!(
            svg,
            r#"<polyline fill="none" {style} points="{}"/>"#,
            pts.join(" ")
        );
    }

    fn open(&self, title: &str, y_label: &str) -> String {
        let mut svg = String::new();
        let _ = writeln!(
            svg,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
        );
        let _ = writeln!(
            svg,
            r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#
        );
        let _ = writeln!(
            svg,
            r#"<text x="{:.2}" y="20" text-anchor="middle" font-size="14">{}</text>"#,
            WIDTH / 2.0,
            escape(title)
        );
        let (x0, x1, y0, y1) = (LEFT, WIDTH - RIGHT, TOP, HEIGHT - BOTTOM);
        let _ = writeln!(
            svg,
            r#"<path d="M{x0},{y0} L{x0},{y1} L{x1},{y1}" fill="none" stroke="black"/>"#
        );
        for i in 0..=TICKS {
            let frac = i as f64 / TICKS as f64;
            let (t, v) = (frac * self.t_max, frac * self.y_max);
            let (tx, vy) = (self.x(t), self.y(v));
            let _ = writeln!(
                svg,
                r#"<line x1="{tx:.2}" y1="{y1}" x2="{tx:.2}" y2="{:.2}" stroke="black"/><text x="{tx:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
                y1 + 4.0,
                y1 + 18.0,
                tick(t)
            );
            let _ = writeln!(
                svg,
                r#"<line x1="{:.2}" y1="{vy:.2}" x2="{x0}" y2="{vy:.2}" stroke="black"/><text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"#,
                x0 - 4.0,
                x0 - 6.0,
                vy + 4.0,
                tick(v)
            );
        }
        let _ = writeln!(
            svg,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">t [s]</text>"#,
            (x0 + x1) / 2.0,
            HEIGHT - 10.0
        );
        let _ = writeln!(
            svg,
            r#"<text x="14" y="{:.2}" text-anchor="middle" transform="rotate(-90 14 {:.2})">{}</text>"#,
            (y0 + y1) / 2.0,
            (y0 + y1) / 2.0,
            escape(y_label)
        );
        svg
    }

    fn bound_line(&self, svg: &mut String, bound: Option<f64>) {
        let Some(b) = bound.filter(|b| b.is_finite()) else {
            return;
        };
        let y = self.y(b);
        let _ = writeln!(
            svg,
            r##"<line x1="{LEFT}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="#c0392b" stroke-dasharray="6 4"/><text x="{:.2}" y="{:.2}" text-anchor="end" fill="#c0392b">bound {}</text>"##,
            WIDTH - RIGHT,
            WIDTH - RIGHT - 4.0,
            y - 4.0,
            tick(b)
        );
    }
}

fn tick(v: f64) -> String {
    if v == 0.0 || (1e-2..1e4).contains(&v.abs()) {
        format!("{v:.3}")
            .trim_end_matches('0')
            .trim_end_matches('.')
            .to_string()
    } else {
        format!("{v:.2e}")
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}

/// Tracked norm against time with the bound as a dashed horizontal line.
pub fn series(
    title: &str,
    y_label: &str,
    times: &[f64],
    values: &[f64],
    bound: Option<f64>,
) -> String {
    let frame = Frame::new(times, &[values], bound);
    let mut svg = frame.open(title, y_label);
    frame.bound_line(&mut svg, bound);
    frame.polyline(
        &mut svg,
        times,
        values,
        r##"stroke="#1f4e9c" stroke-width="1.5""##,
    );
    svg.push_str("</svg>\n");
    svg
}

/// Columns of a percentile envelope.
pub struct Envelope<'a> {
    pub times: &'a [f64],
    pub lower: &'a [f64],
    pub upper: &'a [f64],
    pub min: &'a [f64],
    pub max: &'a [f64],
    pub mean: &'a [f64],
}

/// Shaded 95% band, dotted extremes, solid mean and the bound.
pub fn envelope(title: &str, y_label: &str, env: &Envelope<'_>, bound: Option<f64>) -> String {
    let frame = Frame::new(env.times, &[env.upper, env.max], bound);
    let mut svg = frame.open(title, y_label);
    let mut band: Vec<String> = frame.points(env.times, env.upper).collect();
    let lower: Vec<String> = frame.points(env.times, env.lower).collect();
    band.extend(lower.into_iter().rev());
    let _ = writeln!(
        svg,
        r##"<polygon fill="#9db8e0" fill-opacity="0.6" stroke="none" points="{}"/>"##,
        band.join(" ")
    );
    let dotted = r##"stroke="#5d6d7e" stroke-width="1" stroke-dasharray="2 3""##;
    frame.polyline(&mut svg, env.times, env.min, dotted);
    frame.polyline(&mut svg, env.times, env.max, dotted);
    frame.polyline(
        &mut svg,
        env.times,
        env.mean,
        r##"stroke="#1f4e9c" stroke-width="1.5""##,
    );
    frame.bound_line(&mut svg, bound);
    svg.push_str("</svg>\n");
    svg
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn series_is_well_formed() {
        let svg = series(
            "a < b",
            "‖z‖",
            &[0.0, 1.0, 2.0],
            &[2.0, 1.0, 0.5],
            Some(1.5),
        );
        assert!(svg.starts_with("<svg") && svg.ends_with("</svg>\n"));
        assert!(svg.contains("a &lt; b"));
        assert!(svg.contains("<polyline"));
        assert!(svg.contains("bound 1.5"));
        assert_eq!(
            svg,
            series(
                "a < b",
                "‖z‖",
                &[0.0, 1.0, 2.0],
                &[2.0, 1.0, 0.5],
                Some(1.5)
            )
        );
    }

    #[test]
    fn envelope_band_closes() {
        let t = [0.0, 1.0];
        let env = Envelope {
            times: &t,
            lower: &[0.5, 0.1],
            upper: &[1.0, 0.3],
            min: &[0.4, 0.0],
            max: &[1.2, 0.4],
            mean: &[0.8, 0.2],
        };
        let svg = envelope("mc", "‖z‖", &env, None);
        let polygon = svg.split("<polygon").nth(1).unwrap();
        let points = polygon
            .split("points=\"")
            .nth(1)
            .unwrap()
            .split('"')
            .next()
            .unwrap();
        assert_eq!(points.split(' ').count(), 4);
        assert!(!svg.contains("bound"));
    }

    #[test]
    fn flat_zero_series_still_scales() {
        let svg = series("z", "y", &[0.0, 1.0], &[0.0, 0.0], None);
        assert!(!svg.contains("NaN"));
    }
}
