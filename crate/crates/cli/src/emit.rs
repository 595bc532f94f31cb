//! CSV and plot-data emission. One fixed header per trace kind; floats
//! print in shortest round-trip form, so identical runs produce identical
//! bytes.

use std::io::{self, Write};

use dossim_core::consensus::MasTrace;
use dossim_core::impulsive::ImpulsiveTrace;
use dossim_core::linalg::norm2;

use crate::runner::EstimateRow;

/// `t,bd_hat,bf_hat,event_kind`, one row per estimator event.
pub fn write_estimates_csv(rows: &[EstimateRow], w: &mut impl Write) -> io::Result<()> {
    writeln!(w, "t,bd_hat,bf_hat,event_kind")?;
    for r in rows {
        writeln!(w, "{},{},{},{}", r.t, r.bd, r.bf, r.kind)?;
    }
    Ok(())
}

/// Step-function corner vertices of both estimates, suitable for a plain
/// line plot: at each event the pre-update values repeat at the new time
/// before the post-update values.
pub fn write_plotdata_csv(rows: &[EstimateRow], w: &mut impl Write) -> io::Result<()> {
    writeln!(w, "t,bd_hat,bf_hat")?;
    let mut prev: Option<&EstimateRow> = None;
    for r in rows {
        if let Some(p) = prev {
            if p.bd != r.bd || p.bf != r.bf {
                writeln!(w, "{},{},{}", r.t, p.bd, p.bf)?;
            }
        }
        writeln!(w, "{},{},{}", r.t, r.bd, r.bf)?;
        prev = Some(r);
    }
    Ok(())
}

/// `t_k,delta_k,denied,e_norm,x_1..x_N`.
pub fn write_consensus_csv(trace: &MasTrace, w: &mut impl Write) -> io::Result<()> {
    let n = trace.samples.first().map_or(0, |s| s.x.len());
    let mut header = String::from("t_k,delta_k,denied,e_norm");
    for i in 1..=n {
        header.push_str(&format!(",x_{i}"));
    }
    writeln!(w, "{header}")?;
    for s in &trace.samples {
        let mut line = format!("{},{},{},{}", s.t, s.delta, s.denied, s.e_norm);
        for v in &s.x {
            line.push_str(&format!(",{v}"));
        }
        writeln!(w, "{line}")?;
    }
    Ok(())
}

/// `t_k,delta_k,applied,norm_x_minus,norm_x_plus,V,alpha_cum`.
pub fn write_impulsive_csv(trace: &ImpulsiveTrace, w: &mut impl Write) -> io::Result<()> {
    writeln!(
        w,
        "t_k,delta_k,applied,norm_x_minus,norm_x_plus,V,alpha_cum"
    )?;
    for e in &trace.events {
        writeln!(
            w,
            "{},{},{},{},{},{},{}",
            e.t,
            e.delta,
            e.applied,
            norm2(&e.x_minus),
            norm2(&e.x_plus),
            e.v,
            e.alpha_cum
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn estimates_csv_shape() {
        let rows = vec![
            EstimateRow {
                t: 0.0,
                bd: 0.01,
                bf: 0.01,
                kind: "init",
            },
            EstimateRow {
                t: 4.0,
                bd: 0.01,
                bf: 0.01,
                kind: "launch",
            },
            EstimateRow {
                t: 4.5,
                bd: 0.4,
                bf: 0.01,
                kind: "completion",
            },
        ];
        let mut buf = Vec::new();
        write_estimates_csv(&rows, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "t,bd_hat,bf_hat,event_kind");
        assert_eq!(lines.len(), 4);
        assert_eq!(lines[1], "0,0.01,0.01,init");
    }

    #[test]
    fn plotdata_inserts_corner_vertices() {
        let rows = vec![
            EstimateRow {
                t: 0.0,
                bd: 0.01,
                bf: 0.01,
                kind: "init",
            },
            EstimateRow {
                t: 4.5,
                bd: 0.4,
                bf: 0.01,
                kind: "completion",
            },
        ];
        let mut buf = Vec::new();
        write_plotdata_csv(&rows, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        // Header, start vertex, pre-update corner, post-update vertex.
        assert_eq!(lines.len(), 4);
        assert_eq!(lines[1], "0,0.01,0.01");
        assert_eq!(lines[2], "4.5,0.01,0.01");
        assert_eq!(lines[3], "4.5,0.4,0.01");
    }

    #[test]
    fn empty_rows_produce_a_header_only_file() {
        let mut buf = Vec::new();
        write_estimates_csv(&[], &mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "t,bd_hat,bf_hat,event_kind\n"
        );
    }
}
