//! Flat CSV, JSON and SVG renderings of a [`StabilityReport`].

use serde::Serialize;

use super::experiment::StabilityReport;
use crate::error::{Error, Result};

/// Version tag written into every JSON document.
pub const SCHEMA_VERSION: u32 = 1;

pub const CSV_HEADER: [&str; 16] = [
    "alpha",
    "coordinate",
    "d1_proxy",
    "dbar2",
    "w2_gaussian",
    "d2_upper",
    "m_p",
    "m_q",
    "dk_hat",
    "dk_se",
    "bound_factor",
    "bound_rhs",
    "allowance",
    "margin",
    "pass",
    "baseline_dk",
];

fn num(x: f64) -> String {
    format!("{x}")
}

fn opt(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

/// One line per `(α, coordinate)`. Contains no timing, so equal configs give equal bytes.
pub fn to_csv(report: &StabilityReport) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let io = |e: csv::Error| Error::InvalidProblem(format!("csv: {e}"));
    w.write_record(CSV_HEADER).map_err(io)?;
    for r in &report.rows {
        let base = report
            .baseline
            .iter()
            .find(|b| b.coordinate == r.coordinate)
            .map(|b| b.dk_hat);
        w.write_record([
            opt(r.alpha),
            r.coordinate.clone(),
            num(r.d1_proxy),
            num(r.dbar2),
            opt(r.w2_gaussian),
            num(r.d2_upper),
            num(r.m_p),
            num(r.m_q),
            num(r.dk_hat),
            num(r.dk_se),
            num(r.bound_factor),
            num(r.bound_rhs),
            num(r.allowance),
            num(r.margin),
            r.pass.to_string(),
            opt(base),
        ])
        .map_err(io)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::InvalidProblem(format!("csv: {e}")))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

#[derive(Serialize)]
struct Envelope<'a, T: Serialize> {
    precistab_schema: u32,
    #[serde(flatten)]
    body: &'a T,
}

/// Pretty JSON with the schema tag merged into the top-level object.
pub fn to_json<T: Serialize>(value: &T) -> String {
    serde_json::to_string_pretty(&Envelope {
        precistab_schema: SCHEMA_VERSION,
        body: value,
    })
    .expect("report types serialize")
}

/// Distance proxy used on the x axis of the scatter plot.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum XAxis {
    D1Proxy,
    Dbar2,
    W2Gaussian,
}

impl XAxis {
    fn label(&self) -> &'static str {
        match self {
            XAxis::D1Proxy => "d1 (raw-sample W1)",
            XAxis::Dbar2 => "dbar2",
            XAxis::W2Gaussian => "W2 (Gaussian closed form)",
        }
    }
}

const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf",
];

/// Static scatter of `dk_hat` against the chosen distance, one colour per coordinate.
pub fn to_svg(report: &StabilityReport, x_axis: XAxis) -> String {
    let (w, h, pad) = (640.0, 440.0, 60.0);
    let pts: Vec<(f64, f64, &str)> = report
        .rows
        .iter()
        .filter_map(|r| {
            let x = match x_axis {
                XAxis::D1Proxy => Some(r.d1_proxy),
                XAxis::Dbar2 => Some(r.dbar2),
                XAxis::W2Gaussian => r.w2_gaussian,
            }?;
            Some((x, r.dk_hat, r.coordinate.as_str()))
        })
        .collect();
    let mut labels: Vec<&str> = Vec::new();
    for p in &pts {
        if !labels.contains(&p.2) {
            labels.push(p.2);
        }
    }
    let span = |vals: &mut dyn Iterator<Item = f64>| {
        let (lo, hi) = vals.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
        if !lo.is_finite() {
            (0.0, 1.0)
        } else if hi - lo < 1e-300 {
            (lo - 0.5, hi + 0.5)
        } else {
            (lo, hi)
        }
    };
    let (x0, x1) = span(&mut pts.iter().map(|p| p.0));
    let (y0, y1) = span(&mut pts.iter().map(|p| p.1));
    let sx = |x: f64| pad + (x - x0) / (x1 - x0) * (w - 2.0 * pad);
    let sy = |y: f64| h - pad - (y - y0) / (y1 - y0) * (h - 2.0 * pad);

    let mut s = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\">\n\
         <rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
    );
    s += &format!(
        "<line x1=\"{pad}\" y1=\"{b}\" x2=\"{r}\" y2=\"{b}\" stroke=\"black\"/>\n\
         <line x1=\"{pad}\" y1=\"{pad}\" x2=\"{pad}\" y2=\"{b}\" stroke=\"black\"/>\n",
        b = h - pad,
        r = w - pad
    );
    for k in 0..=4 {
        let t = k as f64 / 4.0;
        let (xv, yv) = (x0 + t * (x1 - x0), y0 + t * (y1 - y0));
        s += &format!(
            "<text x=\"{:.1}\" y=\"{:.1}\" font-size=\"10\" text-anchor=\"middle\">{:.3e}</text>\n",
            sx(xv),
            h - pad + 16.0,
            xv
        );
        s += &format!(
            "<text x=\"{:.1}\" y=\"{:.1}\" font-size=\"10\" text-anchor=\"end\">{:.3e}</text>\n",
            pad - 4.0,
            sy(yv) + 3.0,
            yv
        );
    }
    s += &format!(
        "<text x=\"{:.1}\" y=\"{:.1}\" font-size=\"13\" text-anchor=\"middle\">{}</text>\n",
        w / 2.0,
        h - 12.0,
        x_axis.label()
    );
    s += &format!(
        "<text x=\"16\" y=\"{:.1}\" font-size=\"13\" text-anchor=\"middle\" transform=\"rotate(-90 16 {:.1})\">dK_hat ({})</text>\n",
        h / 2.0,
        h / 2.0,
        report.statistic
    );
    for (x, y, c) in &pts {
        let color = PALETTE[labels.iter().position(|l| l == c).unwrap() % PALETTE.len()];
        s += &format!(
            "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"3.5\" fill=\"{color}\"/>\n",
            sx(*x),
            sy(*y)
        );
    }
    for (i, l) in labels.iter().enumerate() {
        let y = pad + 14.0 * i as f64;
        s += &format!(
            "<circle cx=\"{:.1}\" cy=\"{y:.1}\" r=\"3.5\" fill=\"{}\"/><text x=\"{:.1}\" y=\"{:.1}\" font-size=\"10\">{l}</text>\n",
            w - pad + 8.0,
            PALETTE[i % PALETTE.len()],
            w - pad + 14.0,
            y + 3.0
        );
    }
    s += "</svg>\n";
    s
}
