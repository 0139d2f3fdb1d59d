use std::fmt::Write as _;
use std::io;

use super::SimulationTrace;
use crate::levels::LevelDecomposition;

/// CSV with one row per grid point: `time`, then `x_i[k]` for every agent in
/// renumbered order, then `z_i_j[k]` for every edge. Ids are 1-based.
pub fn write_csv<W: io::Write>(trace: &SimulationTrace, decomp: &LevelDecomposition, out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let n = trace.states.first().and_then(|row| row.first()).map_or(0, |x| x.len());
    let mut header = vec!["time".to_string()];
    for &i in &decomp.renumbering {
        for k in 1..=n {
            header.push(format!("x_{}[{k}]", i + 1));
        }
    }
    for &(i, j) in &trace.edges {
        for k in 1..=n {
            header.push(format!("z_{}_{}[{k}]", i + 1, j + 1));
        }
    }
    w.write_record(&header)?;
    let mut row = Vec::with_capacity(header.len());
    for k in 0..trace.len() {
        row.clear();
        row.push(trace.times[k].to_string());
        for &i in &decomp.renumbering {
            row.extend(trace.states[k][i].iter().map(|v| v.to_string()));
        }
        for z in &trace.errors[k] {
            row.extend(z.iter().map(|v| v.to_string()));
        }
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf",
];

/// Line chart of `‖z_ij(t)‖` per edge as a standalone SVG document.
pub fn write_svg<W: io::Write>(trace: &SimulationTrace, mut out: W) -> io::Result<()> {
    let (width, height, pad) = (800.0, 400.0, 50.0);
    let t_max = trace.times.last().copied().unwrap_or(1.0).max(f64::MIN_POSITIVE);
    let y_max = trace
        .errors
        .iter()
        .flat_map(|row| row.iter().map(|z| z.norm()))
        .fold(0.0, f64::max)
        .max(f64::MIN_POSITIVE);
    let stride = (trace.len() / 1000).max(1);
    let x_of = |t: f64| pad + (width - 2.0 * pad) * t / t_max;
    let y_of = |v: f64| height - pad - (height - 2.0 * pad) * v / y_max;

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}">"#
    );
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        svg,
        r#"<path d="M{pad} {pad} L{pad} {b} L{r} {b}" stroke="black" fill="none"/>"#,
        b = height - pad,
        r = width - pad
    );
    let _ = writeln!(
        svg,
        r#"<text x="{pad}" y="{y}" font-size="12">0</text><text x="{x}" y="{y}" font-size="12" text-anchor="end">t = {t_max:.3}</text>"#,
        y = height - pad + 16.0,
        x = width - pad
    );
    let _ = writeln!(
        svg,
        r#"<text x="{x}" y="{y}" font-size="12">max |z| = {y_max:.3e}</text>"#,
        x = pad + 4.0,
        y = pad - 8.0
    );
    for (e, &(i, j)) in trace.edges.iter().enumerate() {
        let mut d = String::new();
        let mut k = 0;
        while k < trace.len() {
            let cmd = if d.is_empty() { 'M' } else { 'L' };
            let _ = write!(d, "{cmd}{:.2} {:.2} ", x_of(trace.times[k]), y_of(trace.errors[k][e].norm()));
            k = if k + 1 == trace.len() { k + 1 } else { (k + stride).min(trace.len() - 1) };
        }
        let color = PALETTE[e % PALETTE.len()];
        let _ = writeln!(svg, r#"<path d="{}" stroke="{color}" fill="none" stroke-width="1.5"/>"#, d.trim_end());
        let _ = writeln!(
            svg,
            r#"<text x="{x}" y="{y}" font-size="12" fill="{color}">z_{}_{}</text>"#,
            i + 1,
            j + 1,
            x = width - pad + 4.0,
            y = pad + 14.0 * e as f64
        );
    }
    svg.push_str("</svg>\n");
    out.write_all(svg.as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::Tolerances;
    use crate::corpus;
    use crate::criterion::check;
    use crate::levels::decompose;
    use crate::simulation::{simulate, LeaderSignal};
    use crate::synthesis::{synthesize, SplitStrategy};
    use nalgebra::DVector;

    fn trace() -> (SimulationTrace, LevelDecomposition) {
        let spec = corpus::example2();
        let d = decompose(&spec).unwrap();
        let r = check(&spec, &d, &Tolerances::default()).unwrap();
        let c = synthesize(&spec, &d, &r, &SplitStrategy::ParentOnly, &Tolerances::default()).unwrap();
        let x0 = vec![DVector::from_column_slice(&[1.0, 0.0]); 3];
        (simulate(&spec, &d, &c, &x0, &[LeaderSignal::Zero], 0.05, Some(0.01)).unwrap(), d)
    }

    #[test]
    fn csv_header_and_rows() {
        let (tr, d) = trace();
        let mut buf = Vec::new();
        write_csv(&tr, &d, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(
            lines.next().unwrap(),
            "time,x_1[1],x_1[2],x_2[1],x_2[2],x_3[1],x_3[2],z_2_1[1],z_2_1[2],z_3_2[1],z_3_2[2]"
        );
        assert_eq!(lines.count(), tr.len());
    }

    #[test]
    fn svg_has_one_path_per_edge() {
        let (tr, _) = trace();
        let mut buf = Vec::new();
        write_svg(&tr, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("<svg"));
        assert_eq!(text.matches("stroke-width=\"1.5\"").count(), 2);
    }
}
