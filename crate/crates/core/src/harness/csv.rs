use std::io::{self, Write};

use crate::pbs::PbsResult;
use crate::state_space::{Cir, Trajectory};
use crate::text::fmt_real;

/// `k,t,z_obs,z_out`, one row per step.
pub fn write_trajectory_csv<W: Write>(mut w: W, traj: &Trajectory) -> io::Result<()> {
    writeln!(w, "k,t,z_obs,z_out")?;
    for k in 0..traj.z_obs.len() {
        writeln!(
            w,
            "{k},{},{},{}",
            fmt_real(traj.t[k]),
            fmt_real(traj.z_obs[k]),
            fmt_real(traj.z_out[k])
        )?;
    }
    w.flush()
}

/// `i,t,g`.
pub fn write_cir_csv<W: Write>(mut w: W, cir: &Cir) -> io::Result<()> {
    writeln!(w, "i,t,g")?;
    for (i, g) in cir.g.iter().enumerate() {
        writeln!(w, "{i},{},{}", fmt_real(i as f64 * cir.dt), fmt_real(*g))?;
    }
    w.flush()
}

/// The trajectory columns filled with particle counts, plus provenance columns.
pub fn write_pbs_csv<W: Write>(mut w: W, res: &PbsResult, dt: f64) -> io::Result<()> {
    writeln!(w, "k,t,z_obs,z_out,seed,particles,partitions")?;
    for k in 0..res.bound_count.len() {
        writeln!(
            w,
            "{k},{},{},{},{},{},{}",
            fmt_real(k as f64 * dt),
            res.bound_count[k],
            res.out_count[k],
            res.seed,
            res.particles,
            res.partitions
        )?;
    }
    w.flush()
}
