//! Per-query run traces and their CSV schema, shared by the engine and the
//! baselines.
//!
//! Columns: `t, x_0..x_{m-1}, f, s_t, clamped, pool_size, ms`. Floats are
//! written with shortest round-trip formatting, so re-parsing a trace
//! reproduces the exact values.

use crate::geometry::Point;
use std::io::{self, BufRead, Write};

#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub t: usize,
    pub point: Point,
    pub value: f64,
    /// Max clipped score at this step (the halting statistic).
    pub score: f64,
    pub clamped: bool,
    pub pool_size: usize,
    pub ms: f64,
}

#[derive(Debug, Clone, Default)]
pub struct RunTrace {
    pub dim: usize,
    pub rows: Vec<TraceRow>,
}

impl RunTrace {
    pub fn new(dim: usize) -> Self {
        Self {
            dim,
            rows: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn push(&mut self, row: TraceRow) {
        debug_assert_eq!(row.point.len(), self.dim);
        self.rows.push(row);
    }

    /// Equality on everything except wall-clock timing; two runs with the
    /// same seed agree on this projection.
    pub fn same_queries(&self, other: &RunTrace) -> bool {
        self.dim == other.dim
            && self.rows.len() == other.rows.len()
            && self.rows.iter().zip(&other.rows).all(|(a, b)| {
                a.t == b.t
                    && a.point == b.point
                    && a.value == b.value
                    && a.score == b.score
                    && a.clamped == b.clamped
            })
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        write!(w, "t")?;
        for i in 0..self.dim {
            write!(w, ",x_{i}")?;
        }
        writeln!(w, ",f,s_t,clamped,pool_size,ms")?;
        for r in &self.rows {
            write!(w, "{}", r.t)?;
            for x in &r.point {
                write!(w, ",{x}")?;
            }
            writeln!(
                w,
                ",{},{},{},{},{}",
                r.value,
                r.score,
                u8::from(r.clamped),
                r.pool_size,
                r.ms
            )?;
        }
        Ok(())
    }

    pub fn read_csv<R: BufRead>(r: R) -> io::Result<RunTrace> {
        let bad = |msg: &str| io::Error::new(io::ErrorKind::InvalidData, msg.to_string());
        let mut lines = r.lines();
        let header = lines.next().ok_or_else(|| bad("empty trace file"))??;
        let cols: Vec<&str> = header.split(',').collect();
        if cols.len() < 7 || cols[0] != "t" || cols[cols.len() - 1] != "ms" {
            return Err(bad("unrecognized trace header"));
        }
        let dim = cols.len() - 6;
        let mut trace = RunTrace::new(dim);
        for line in lines {
            let line = line?;
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != dim + 6 {
                return Err(bad("wrong field count in trace row"));
            }
            let parse_f = |s: &str| s.parse::<f64>().map_err(|_| bad("bad float in trace"));
            let point: Result<Point, _> = fields[1..1 + dim].iter().map(|s| parse_f(s)).collect();
            trace.rows.push(TraceRow {
                t: fields[0].parse().map_err(|_| bad("bad step index"))?,
                point: point?,
                value: parse_f(fields[1 + dim])?,
                score: parse_f(fields[2 + dim])?,
                clamped: fields[3 + dim] == "1",
                pool_size: fields[4 + dim].parse().map_err(|_| bad("bad pool size"))?,
                ms: parse_f(fields[5 + dim])?,
            });
        }
        Ok(trace)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> RunTrace {
        let mut t = RunTrace::new(2);
        t.push(TraceRow {
            t: 0,
            point: vec![0.5, 0.25],
            value: 1.5,
            score: 0.125,
            clamped: false,
            pool_size: 3,
            ms: 0.42,
        });
        t.push(TraceRow {
            t: 1,
            point: vec![1.0, 0.1234567890123456],
            value: -2.0,
            score: 0.0625,
            clamped: true,
            pool_size: 5,
            ms: 0.1,
        });
        t
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let t = sample();
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        let back = RunTrace::read_csv(buf.as_slice()).unwrap();
        assert_eq!(back.dim, 2);
        assert_eq!(t.rows, back.rows);
    }

    #[test]
    fn header_layout() {
        let t = sample();
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("t,x_0,x_1,f,s_t,clamped,pool_size,ms\n"));
    }

    #[test]
    fn same_queries_ignores_timing() {
        let a = sample();
        let mut b = sample();
        b.rows[0].ms = 999.0;
        b.rows[0].pool_size = 77;
        assert!(a.same_queries(&b));
        b.rows[0].value = 0.0;
        assert!(!a.same_queries(&b));
    }
}
