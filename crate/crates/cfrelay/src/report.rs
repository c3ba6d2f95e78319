//! CSV tables and the SVG BER plot.

use std::fmt::Write;

use cfrelay_core::mlc::{MiEstimate, RateProfile};

use crate::sim::SweepRow;

/// Bumped whenever the columns change.
pub const CSV_VERSION: u32 = 1;
pub const CSV_HEADER: &str = "scheme,snr_db,trials,ber,ber_ci95,fer,fer_ci95,mean_iters";
pub const MI_CSV_HEADER: &str = "level,mi,stderr,assigned_rate,slack";

fn num(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else {
        format!("{x:.6e}")
    }
}

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{:.3}",
            r.scheme,
            r.snr_db,
            r.trials,
            num(r.ber),
            num(r.ber_ci95),
            num(r.fer),
            num(r.fer_ci95),
            r.mean_iters
        )
        .expect("writing to a String");
    }
    out
}

/// One row per level; levels without an assigned rate get empty cells.
pub fn mi_csv(mis: &[MiEstimate], profile: Option<&RateProfile>) -> String {
    let mut out = String::from(MI_CSV_HEADER);
    out.push('\n');
    for (i, e) in mis.iter().enumerate() {
        let (rate, slack) = match profile {
            Some(p) => (format!("{:.6}", p.levels[i]), format!("{:.6}", p.slack[i])),
            None => (String::new(), String::new()),
        };
        writeln!(out, "{},{:.6},{:.6},{rate},{slack}", i + 1, e.mi, e.stderr).expect("writing to a String");
    }
    out
}

const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];

/// BER against SNR on a logarithmic axis, one line per scheme. Points with
/// no observed errors are drawn at the floor of the axis as open circles.
pub fn ber_svg(rows: &[SweepRow]) -> String {
    const W: f64 = 640.0;
    const H: f64 = 440.0;
    const L: f64 = 70.0;
    const R: f64 = 150.0;
    const T: f64 = 20.0;
    const B: f64 = 50.0;

    let mut schemes: Vec<_> = rows.iter().map(|r| r.scheme).collect();
    schemes.dedup();
    schemes.sort();
    schemes.dedup();

    let (mut x0, mut x1) = rows.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), r| (a.min(r.snr_db), b.max(r.snr_db)));
    if !x0.is_finite() {
        (x0, x1) = (0.0, 1.0);
    }
    if x1 - x0 < 1e-9 {
        x0 -= 0.5;
        x1 += 0.5;
    }
    let smallest = rows.iter().filter(|r| r.ber > 0.0).map(|r| r.ber).fold(1.0f64, f64::min);
    let floor_bits = rows.iter().map(|r| r.counts.bits).max().unwrap_or(1).max(1) as f64;
    let lo = smallest.min(1.0 / floor_bits).log10().floor().clamp(-12.0, -1.0);
    let hi = 0.0;

    let px = |x: f64| L + (x - x0) / (x1 - x0) * (W - L - R);
    let py = |b: f64| {
        let v = if b > 0.0 { b.log10().max(lo) } else { lo };
        T + (hi - v) / (hi - lo) * (H - T - B)
    };

    let mut s = String::new();
    writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" font-family="sans-serif" font-size="12">"#).unwrap();
    writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#).unwrap();
    // decade grid and labels
    let mut d = lo as i32;
    while d <= hi as i32 {
        let y = py(10f64.powi(d));
        writeln!(s, r##"<line x1="{L}" y1="{y:.1}" x2="{:.1}" y2="{y:.1}" stroke="#ddd"/>"##, W - R).unwrap();
        writeln!(s, r#"<text x="{:.1}" y="{:.1}" text-anchor="end">1e{d}</text>"#, L - 6.0, y + 4.0).unwrap();
        d += 1;
    }
    let step = nice_step(x1 - x0);
    let mut x = (x0 / step).ceil() * step;
    while x <= x1 + 1e-9 {
        let p = px(x);
        writeln!(s, r##"<line x1="{p:.1}" y1="{T}" x2="{p:.1}" y2="{:.1}" stroke="#eee"/>"##, H - B).unwrap();
        writeln!(s, r#"<text x="{p:.1}" y="{:.1}" text-anchor="middle">{}</text>"#, H - B + 16.0, trim(x)).unwrap();
        x += step;
    }
    writeln!(s, r#"<rect x="{L}" y="{T}" width="{:.1}" height="{:.1}" fill="none" stroke="black"/>"#, W - L - R, H - T - B).unwrap();
    writeln!(s, r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">SNR (dB)</text>"#, L + (W - L - R) / 2.0, H - 12.0).unwrap();
    writeln!(s, r#"<text x="16" y="{:.1}" text-anchor="middle" transform="rotate(-90 16 {:.1})">BER</text>"#, T + (H - T - B) / 2.0, T + (H - T - B) / 2.0).unwrap();

    for (k, scheme) in schemes.iter().enumerate() {
        let color = COLORS[k % COLORS.len()];
        let mut pts: Vec<&SweepRow> = rows.iter().filter(|r| r.scheme == *scheme).collect();
        pts.sort_by(|a, b| a.snr_db.total_cmp(&b.snr_db));
        let path: Vec<String> = pts.iter().map(|r| format!("{:.1},{:.1}", px(r.snr_db), py(r.ber))).collect();
        writeln!(s, r#"<polyline fill="none" stroke="{color}" stroke-width="2" points="{}"/>"#, path.join(" ")).unwrap();
        for r in &pts {
            let fill = if r.ber > 0.0 { color } else { "white" };
            writeln!(s, r#"<circle cx="{:.1}" cy="{:.1}" r="3.5" fill="{fill}" stroke="{color}"/>"#, px(r.snr_db), py(r.ber)).unwrap();
        }
        let ly = T + 16.0 + 20.0 * k as f64;
        writeln!(s, r#"<line x1="{:.1}" y1="{ly:.1}" x2="{:.1}" y2="{ly:.1}" stroke="{color}" stroke-width="2"/>"#, W - R + 12.0, W - R + 36.0).unwrap();
        writeln!(s, r#"<text x="{:.1}" y="{:.1}">{scheme}</text>"#, W - R + 42.0, ly + 4.0).unwrap();
    }
    s.push_str("</svg>\n");
    s
}

fn nice_step(span: f64) -> f64 {
    let raw = span / 8.0;
    let mag = 10f64.powf(raw.log10().floor());
    [1.0, 2.0, 5.0, 10.0].iter().map(|m| m * mag).find(|&v| v >= raw).unwrap_or(10.0 * mag)
}

fn trim(x: f64) -> String {
    let s = format!("{x:.2}");
    s.trim_end_matches('0').trim_end_matches('.').to_string()
}
