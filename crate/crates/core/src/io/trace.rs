//! Objective traces as CSV with `#` comment lines in front.
//!
//! `wall_time_s` is the only column that differs between repeated runs.

use std::io::Write;

use crate::error::Result;
use crate::learn::train::TrainReport;
use crate::work::ObjectiveReport;

fn write_comments(w: &mut impl Write, comments: &[String]) -> Result<()> {
    for c in comments {
        for line in c.lines() {
            writeln!(w, "# {line}")?;
        }
    }
    Ok(())
}

pub fn write_objective_trace(
    w: &mut impl Write,
    comments: &[String],
    trace: &[ObjectiveReport],
) -> Result<()> {
    write_comments(w, comments)?;
    writeln!(w, "epoch,wall_time_s,data_term,l1_term,total,nnz")?;
    for r in trace {
        writeln!(
            w,
            "{},{:.6},{:e},{:e},{:e},{}",
            r.epoch, r.wall_time, r.data_term, r.l1_term, r.total, r.nnz
        )?;
    }
    Ok(())
}

pub fn write_train_trace(
    w: &mut impl Write,
    comments: &[String],
    trace: &[TrainReport],
) -> Result<()> {
    write_comments(w, comments)?;
    writeln!(
        w,
        "epoch,wall_time_s,data_term,l1_term,total,nnz,grad_norm,eta"
    )?;
    for t in trace {
        let r = &t.objective;
        writeln!(
            w,
            "{},{:.6},{:e},{:e},{:e},{},{:e},{:e}",
            r.epoch, r.wall_time, r.data_term, r.l1_term, r.total, r.nnz, t.grad_norm, t.eta
        )?;
    }
    Ok(())
}
