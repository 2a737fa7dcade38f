//! Minimal SVG rendering of posterior curves and surfaces.

use std::fmt::Write;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 320.0;
const MARGIN: f64 = 40.0;

fn frame(title: &str, body: &str) -> String {
    format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" viewBox=\"0 0 {WIDTH} {HEIGHT}\">\n\
         <rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n\
         <text x=\"{MARGIN}\" y=\"20\" font-family=\"sans-serif\" font-size=\"13\">{title}</text>\n\
         {body}</svg>\n"
    )
}

fn range(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| {
        (a.min(v), b.max(v))
    });
    if hi > lo {
        (lo, hi)
    } else {
        (lo - 0.5, lo + 0.5)
    }
}

/// Mean curve over a shaded band, for 1D inputs sorted by `x`.
pub fn band_plot(title: &str, x: &[f64], mean: &[f64], lower: &[f64], upper: &[f64]) -> String {
    let (x0, x1) = range(x.iter().copied());
    let (y0, y1) = range(lower.iter().chain(upper).copied());
    let px = |v: f64| MARGIN + (v - x0) / (x1 - x0) * (WIDTH - 2.0 * MARGIN);
    let py = |v: f64| HEIGHT - MARGIN - (v - y0) / (y1 - y0) * (HEIGHT - 2.0 * MARGIN);

    let mut band = String::new();
    for (xi, u) in x.iter().zip(upper) {
        let _ = write!(band, "{:.2},{:.2} ", px(*xi), py(*u));
    }
    for (xi, l) in x.iter().zip(lower).rev() {
        let _ = write!(band, "{:.2},{:.2} ", px(*xi), py(*l));
    }
    let line: String = x
        .iter()
        .zip(mean)
        .map(|(xi, m)| format!("{:.2},{:.2}", px(*xi), py(*m)))
        .collect::<Vec<_>>()
        .join(" ");
    let axes = format!(
        "<line x1=\"{m}\" y1=\"{b}\" x2=\"{r}\" y2=\"{b}\" stroke=\"black\"/>\n\
         <line x1=\"{m}\" y1=\"{t}\" x2=\"{m}\" y2=\"{b}\" stroke=\"black\"/>\n\
         <text x=\"{m}\" y=\"{lb}\" font-size=\"10\">{x0:.3}</text>\n\
         <text x=\"{r}\" y=\"{lb}\" font-size=\"10\" text-anchor=\"end\">{x1:.3}</text>\n\
         <text x=\"4\" y=\"{b}\" font-size=\"10\">{y0:.3}</text>\n\
         <text x=\"4\" y=\"{t}\" font-size=\"10\">{y1:.3}</text>\n",
        m = MARGIN,
        b = HEIGHT - MARGIN,
        r = WIDTH - MARGIN,
        t = MARGIN,
        lb = HEIGHT - MARGIN + 14.0,
    );
    frame(
        title,
        &format!(
            "{axes}<polygon points=\"{band}\" fill=\"steelblue\" fill-opacity=\"0.3\" stroke=\"none\"/>\n\
             <polyline points=\"{line}\" fill=\"none\" stroke=\"steelblue\" stroke-width=\"1.5\"/>\n"
        ),
    )
}

/// Heatmap of values on an `nx` by `ny` lattice (first axis slowest).
pub fn heatmap(title: &str, nx: usize, ny: usize, values: &[f64]) -> String {
    let (lo, hi) = range(values.iter().copied());
    let cw = (WIDTH - 2.0 * MARGIN) / nx as f64;
    let ch = (HEIGHT - 2.0 * MARGIN) / ny as f64;
    let mut body = String::new();
    for i in 0..nx {
        for j in 0..ny {
            let t = (values[i * ny + j] - lo) / (hi - lo);
            let (r, g, b) = (
                (255.0 * t) as u8,
                (255.0 * (1.0 - (2.0 * t - 1.0).abs())) as u8,
                (255.0 * (1.0 - t)) as u8,
            );
            let _ = writeln!(
                body,
                "<rect x=\"{:.2}\" y=\"{:.2}\" width=\"{:.2}\" height=\"{:.2}\" fill=\"rgb({r},{g},{b})\"/>",
                MARGIN + i as f64 * cw,
                HEIGHT - MARGIN - (j + 1) as f64 * ch,
                cw + 0.05,
                ch + 0.05,
            );
        }
    }
    let _ = writeln!(
        body,
        "<text x=\"{MARGIN}\" y=\"{:.0}\" font-size=\"10\">range {lo:.3} .. {hi:.3}</text>",
        HEIGHT - 10.0
    );
    frame(title, &body)
}
