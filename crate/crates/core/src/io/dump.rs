use super::IoError;
use crate::diagnostics::StoppingRecord;
use crate::models::ScalarFunctionModel;
use crate::spde::{FieldState, NormRow, PathOutcome, SolverConfig, Trajectory};
use byteorder::{ByteOrder, LittleEndian};
use serde::{Deserialize, Serialize};

pub const DUMP_FORMAT: &str = "shelab-trajectory/1";
pub const ROW_COLUMNS: [&str; 5] = ["t", "l1", "linf", "min", "clamp_events"];

/// Which equation the dumped path solves.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PathKind {
    U,
    /// `v` or `v_-`: carries the repulsion `max(w, eps)^{-alpha}`.
    Auxiliary,
}

/// JSON sidecar describing the binary body.
///
/// The body is little-endian `f64`: the five row columns one after the
/// other (`rows` values each), then each snapshot as its time followed by
/// `nx` values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DumpHeader {
    pub format: String,
    pub label: String,
    pub kind: PathKind,
    pub nx: usize,
    pub dt: f64,
    pub steps: u64,
    pub rows: usize,
    pub columns: Vec<String>,
    pub snapshots: usize,
    pub outcome: PathOutcome,
    pub stopping: StoppingRecord,
    pub sigma_sq_integral: f64,
    pub solver: SolverConfig,
    pub b: ScalarFunctionModel,
    pub sigma: ScalarFunctionModel,
    pub master_seed: u64,
    pub path_id: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dump {
    pub header: DumpHeader,
    pub trajectory: Trajectory,
}

pub struct DumpContext<'a> {
    pub kind: PathKind,
    pub solver: &'a SolverConfig,
    pub b: &'a ScalarFunctionModel,
    pub sigma: &'a ScalarFunctionModel,
    pub master_seed: u64,
    pub path_id: u64,
}

/// Sidecar JSON and binary body of one trajectory.
pub fn encode_dump(traj: &Trajectory, ctx: &DumpContext<'_>) -> (String, Vec<u8>) {
    let nx = ctx.solver.grid.nx();
    let header = DumpHeader {
        format: DUMP_FORMAT.into(),
        label: traj.label.clone(),
        kind: ctx.kind,
        nx,
        dt: traj.dt,
        steps: traj.steps,
        rows: traj.rows.len(),
        columns: ROW_COLUMNS.iter().map(|s| s.to_string()).collect(),
        snapshots: traj.snapshots.len(),
        outcome: traj.outcome,
        stopping: traj.stopping.clone(),
        sigma_sq_integral: traj.sigma_sq_integral,
        solver: ctx.solver.clone(),
        b: ctx.b.clone(),
        sigma: ctx.sigma.clone(),
        master_seed: ctx.master_seed,
        path_id: ctx.path_id,
    };
    let mut vals: Vec<f64> = Vec::with_capacity(5 * traj.rows.len() + traj.snapshots.len() * (nx + 1));
    vals.extend(traj.rows.iter().map(|r| r.t));
    vals.extend(traj.rows.iter().map(|r| r.l1));
    vals.extend(traj.rows.iter().map(|r| r.linf));
    vals.extend(traj.rows.iter().map(|r| r.min));
    vals.extend(traj.rows.iter().map(|r| r.clamp_events as f64));
    for s in &traj.snapshots {
        vals.push(s.t);
        vals.extend_from_slice(s.values());
    }
    let mut body = vec![0u8; 8 * vals.len()];
    LittleEndian::write_f64_into(&vals, &mut body);
    (serde_json::to_string_pretty(&header).expect("header serializes"), body)
}

pub fn decode_dump(sidecar: &str, body: &[u8]) -> Result<Dump, IoError> {
    let header: DumpHeader = serde_json::from_str(sidecar).map_err(|e| IoError::Format(format!("sidecar: {e}")))?;
    if header.format != DUMP_FORMAT {
        return Err(IoError::Format(format!("unknown dump format `{}`", header.format)));
    }
    let n = header.rows;
    let want = 5 * n + header.snapshots * (header.nx + 1);
    if body.len() != 8 * want {
        return Err(IoError::Format(format!("body has {} bytes, header implies {}", body.len(), 8 * want)));
    }
    let mut vals = vec![0.0; want];
    LittleEndian::read_f64_into(body, &mut vals);
    let col = |c: usize| &vals[c * n..(c + 1) * n];
    let rows = (0..n)
        .map(|i| NormRow { t: col(0)[i], l1: col(1)[i], linf: col(2)[i], min: col(3)[i], clamp_events: col(4)[i] as u64 })
        .collect();
    let snapshots = vals[5 * n..]
        .chunks_exact(header.nx + 1)
        .map(|c| FieldState::new(c[0], c[1..].to_vec()))
        .collect();
    let trajectory = Trajectory {
        label: header.label.clone(),
        dt: header.dt,
        rows,
        snapshots,
        outcome: header.outcome,
        stopping: header.stopping.clone(),
        steps: header.steps,
        sigma_sq_integral: header.sigma_sq_integral,
    };
    Ok(Dump { header, trajectory })
}

/// Whitespace-separated norm table for plotting.
pub fn rows_dat(traj: &Trajectory) -> String {
    let mut s = format!("# {}\n", ROW_COLUMNS.join(" "));
    for r in &traj.rows {
        s.push_str(&format!("{} {} {} {} {}\n", r.t, r.l1, r.linf, r.min, r.clamp_events));
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spde::{simulate_path, ExtraDrift, NoiseSource, RunOptions};

    #[test]
    fn dump_round_trip_is_exact() {
        let solver = SolverConfig { dt: 1e-3, horizon: 0.02, ..SolverConfig::default() }.with_grid(16).unwrap();
        let b = ScalarFunctionModel::power(1.0, 2.0);
        let s = ScalarFunctionModel::constant(1.0);
        let u0 = FieldState::constant(solver.grid, 1.0);
        let tr = simulate_path(&u0, &solver, &b, &s, ExtraDrift::None, NoiseSource::new(3, 4), &RunOptions::new(1e6).with_snapshots(1)).unwrap();
        let ctx = DumpContext { kind: PathKind::U, solver: &solver, b: &b, sigma: &s, master_seed: 3, path_id: 4 };
        let (side, body) = encode_dump(&tr, &ctx);
        let d = decode_dump(&side, &body).unwrap();
        assert_eq!(d.trajectory, tr);
        assert!(decode_dump(&side, &body[8..]).is_err());
    }
}
