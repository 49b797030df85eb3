//! On-disk layout of a run:
//!
//! ```text
//! manifest.txt
//! traces.csv
//! snapshots/t_<idx>.csv, snapshots/times.csv
//! diagnostics/*.csv, diagnostics/summary.txt
//! ```

use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use owc_core::diagnostics::{chamber_identity, energy_monitor, mass_drift, write_columns};
use owc_core::model::{BoundaryState, DomainLayout, FieldState};
use owc_core::solver::{LeftBoundary, Problem, SimulationResult};
use sha2::{Digest, Sha256};

/// Collects the files written into one output directory.
pub struct OutputDir {
    root: PathBuf,
    files: Vec<String>,
}

impl OutputDir {
    pub fn create(root: &Path) -> io::Result<Self> {
        fs::create_dir_all(root)?;
        Ok(OutputDir {
            root: root.to_path_buf(),
            files: Vec::new(),
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    /// Opens `rel` for writing and records it for the manifest.
    pub fn file(&mut self, rel: &str) -> io::Result<BufWriter<File>> {
        let path = self.root.join(rel);
        if let Some(dir) = path.parent() {
            fs::create_dir_all(dir)?;
        }
        self.files.push(rel.to_string());
        Ok(BufWriter::new(File::create(path)?))
    }

    pub fn columns(&mut self, rel: &str, headers: &[&str], columns: &[&[f64]]) -> io::Result<()> {
        let mut w = self.file(rel)?;
        write_columns(&mut w, headers, columns)?;
        w.flush()
    }

    pub fn text(&mut self, rel: &str, body: &str) -> io::Result<()> {
        let mut w = self.file(rel)?;
        w.write_all(body.as_bytes())?;
        w.flush()
    }

    /// Writes `manifest.txt` listing every file written so far.
    pub fn finish(
        mut self,
        config_path: Option<&Path>,
        config_bytes: &[u8],
        command: &str,
    ) -> io::Result<PathBuf> {
        let stamp = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        let hash = hex_digest(config_bytes);
        self.files.sort();
        let mut body = String::new();
        body.push_str(&format!("command = {command}\n"));
        body.push_str(&format!(
            "config_path = {}\n",
            config_path.map_or("-".into(), |p| p.display().to_string())
        ));
        body.push_str(&format!("config_sha256 = {hash}\n"));
        body.push_str(&format!(
            "code_version = {} {}\n",
            env!("CARGO_PKG_NAME"),
            env!("CARGO_PKG_VERSION")
        ));
        body.push_str(&format!("timestamp_unix = {stamp}\n"));
        body.push_str("[files]\n");
        for f in &self.files {
            body.push_str(f);
            body.push('\n');
        }
        let path = self.root.join("manifest.txt");
        fs::write(&path, body)?;
        Ok(path)
    }
}

pub fn hex_digest(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

/// `x, zeta, q, domain_tag`, one row per cell, 17 significant digits.
pub fn write_snapshot<W: Write>(
    mut w: W,
    layout: &DomainLayout<f64>,
    field: &FieldState<f64>,
) -> io::Result<()> {
    writeln!(w, "x,zeta,q,domain_tag")?;
    for (sub, f) in layout.domains.iter().zip(&field.domains) {
        for j in 0..sub.n {
            writeln!(
                w,
                "{:.16e},{:.16e},{:.16e},{}",
                sub.cell_center(j),
                f.zeta[j],
                f.q[j],
                sub.tag.as_str()
            )?;
        }
    }
    Ok(())
}

/// Snapshots, traces and the standard diagnostics of a finished run.
pub fn write_result(
    out: &mut OutputDir,
    problem: &Problem<f64>,
    res: &SimulationResult<f64>,
) -> io::Result<String> {
    let layout = &problem.layout;
    let mut times = Vec::with_capacity(res.snapshots.len());
    for (k, snap) in res.snapshots.iter().enumerate() {
        let mut w = out.file(&format!("snapshots/t_{k:05}.csv"))?;
        write_snapshot(&mut w, layout, snap)?;
        w.flush()?;
        times.push(snap.t);
    }
    let idx: Vec<f64> = (0..times.len()).map(|k| k as f64).collect();
    out.columns("snapshots/times.csv", &["idx", "t"], &[&idx, &times])?;

    let mut w = out.file("traces.csv")?;
    res.traces.write_csv(&mut w)?;
    w.flush()?;

    let s = &res.series;
    let series: [(&str, Vec<f64>); 7] = [
        ("t", s.t.clone()),
        ("volume", s.volume.clone()),
        ("chamber_mean_zeta", s.chamber_mean_zeta.clone()),
        ("int_q_i", s.int_q_i.clone()),
        ("energy", s.energy.clone()),
        ("courant", s.courant.clone()),
        ("inflow_energy_flux", s.inflow_energy_flux.clone()),
    ];
    let headers: Vec<&str> = series.iter().map(|(h, _)| *h).collect();
    let cols: Vec<&[f64]> = series.iter().map(|(_, c)| c.as_slice()).collect();
    out.columns("diagnostics/series.csv", &headers, &cols)?;
    for (name, col) in series.iter().skip(1) {
        out.columns(
            &format!("diagnostics/{name}.csv"),
            &["t", name],
            &[&s.t, col],
        )?;
    }

    let ci = chamber_identity(res, &problem.params);
    out.columns(
        "diagnostics/chamber_identity.csv",
        &["t", "residual"],
        &[&ci.t, &ci.residual],
    )?;
    let mut summary = String::new();
    if let Ok(e) = energy_monitor(res, problem) {
        out.columns(
            "diagnostics/energy.csv",
            &["t", "physical", "ratio"],
            &[&e.t, &e.physical, &e.ratio],
        )?;
        // the symmetrizer energy lives on the snapshot times
        out.columns(
            "diagnostics/symmetrizer_energy.csv",
            &["t", "symmetrizer"],
            &[&times, &e.symmetrizer],
        )?;
    }
    summary.push_str(&format!("steps = {}\n", res.steps));
    summary.push_str(&format!("t_final = {}\n", res.final_field.t));
    summary.push_str(&format!("max_courant = {}\n", res.max_courant));
    summary.push_str(&format!("q_i_final = {}\n", res.final_g.q_i));
    summary.push_str(&format!("P_ch_final = {}\n", res.final_g.p_ch));
    let drift_key = match problem.left {
        LeftBoundary::Wall => "mass_drift_relative",
        // volume also enters and leaves through the open upstream end
        LeftBoundary::Open => "volume_change_relative",
    };
    summary.push_str(&format!("{drift_key} = {:e}\n", mass_drift(res, layout)));
    summary.push_str(&format!(
        "chamber_identity_max_residual = {:e} (amplitude {:e})\n",
        ci.max_residual, ci.amplitude
    ));
    summary.push_str(&format!(
        "wall_clock_s = {:.3}\n",
        res.wall_clock.as_secs_f64()
    ));
    out.text("diagnostics/summary.txt", &summary)?;
    Ok(summary)
}

/// State of the last accepted step of an aborted run.
pub fn write_dump(
    out: &mut OutputDir,
    layout: &DomainLayout<f64>,
    field: &FieldState<f64>,
    g: &BoundaryState<f64>,
    reason: &str,
) -> io::Result<()> {
    let mut w = out.file("dump/state.csv")?;
    write_snapshot(&mut w, layout, field)?;
    w.flush()?;
    out.text(
        "dump/reason.txt",
        &format!(
            "t = {}\nq_i = {}\nP_ch = {}\nerror = {reason}\n",
            field.t, g.q_i, g.p_ch
        ),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sha256_of_empty_input() {
        assert_eq!(
            hex_digest(b""),
            "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855"
        );
    }
}
